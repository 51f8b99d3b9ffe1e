// Copyright 2026 The srvg Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SRVG_SRVG_HPP
#define SRVG_SRVG_HPP

#include "srvg/adam.hpp"
#include "srvg/checkpoint.hpp"
#include "srvg/common.hpp"
#include "srvg/dataset.hpp"
#include "srvg/generation.hpp"
#include "srvg/gradcheck.hpp"
#include "srvg/kernels.hpp"
#include "srvg/losses.hpp"
#include "srvg/metrics.hpp"
#include "srvg/midi.hpp"
#include "srvg/model.hpp"
#include "srvg/pianoroll.hpp"
#include "srvg/rng.hpp"
#include "srvg/tensor.hpp"
#include "srvg/training.hpp"

#endif  // SRVG_SRVG_HPP
