// Copyright 2026 The hdclt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Umbrella header.

#include "hdclt/bound_terms.hpp"
#include "hdclt/gaussian_special.hpp"
#include "hdclt/harness.hpp"
#include "hdclt/hermite_suprema.hpp"
#include "hdclt/models.hpp"
#include "hdclt/parallel.hpp"
#include "hdclt/quadrature.hpp"
#include "hdclt/rect_distance.hpp"
#include "hdclt/rectangle.hpp"
#include "hdclt/rng.hpp"
#include "hdclt/sharpness.hpp"
#include "hdclt/stein_core.hpp"
