// Copyright 2026 The hetgain Authors.
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
#pragma once

#include "hetgain/analysis.hpp"
#include "hetgain/csv.hpp"
#include "hetgain/dataset.hpp"
#include "hetgain/errors.hpp"
#include "hetgain/estimation.hpp"
#include "hetgain/gain_analytic.hpp"
#include "hetgain/policy.hpp"
#include "hetgain/serialization.hpp"
#include "hetgain/sim_engine.hpp"
#include "hetgain/synth.hpp"
