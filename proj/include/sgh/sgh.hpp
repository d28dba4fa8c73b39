// Copyright 2026-present the sgh authors
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

#include "sgh/baselines.hpp"
#include "sgh/codec.hpp"
#include "sgh/common.hpp"
#include "sgh/dataset.hpp"
#include "sgh/eval.hpp"
#include "sgh/hash_code.hpp"
#include "sgh/io.hpp"
#include "sgh/model.hpp"
#include "sgh/parallel.hpp"
#include "sgh/rng.hpp"
#include "sgh/search.hpp"
#include "sgh/training.hpp"
