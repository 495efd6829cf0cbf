/*
 * Copyright 2026 The Meterguard Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "meterguard/meterdata.hpp"

namespace meterguard::testsupport {

// Centralized full-batch gradient descent for the 4-feature load model,
// built straight from contiguous series without the library's extractor.
// Returns the weights after every step.
std::vector<std::array<double, 4>> centralized_gd(
    const std::vector<meterdata::ReadingSeries>& series, std::size_t steps,
    double learning_rate);

}  // namespace meterguard::testsupport
