// Copyright 2026 The accent-toolkit Authors.
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

#include "accent/error.hpp"
#include "accent/util.hpp"
#include "accent/inventory.hpp"
#include "accent/corpus.hpp"
#include "accent/dsp.hpp"
#include "accent/features.hpp"
#include "accent/models.hpp"
#include "accent/harness.hpp"
#include "accent/synth.hpp"
#include "accent/app.hpp"
