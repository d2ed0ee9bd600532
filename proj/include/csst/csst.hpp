// Copyright 2026 The CSST Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Everything in one include.

#include "csst/errors.hpp"
#include "csst/rng.hpp"
#include "csst/pauli.hpp"
#include "csst/expm.hpp"
#include "csst/lindblad.hpp"
#include "csst/shadows.hpp"
#include "csst/transform.hpp"
#include "csst/recovery.hpp"
#include "csst/theory.hpp"
#include "csst/metrics.hpp"
#include "csst/io.hpp"
#include "csst/experiment.hpp"
