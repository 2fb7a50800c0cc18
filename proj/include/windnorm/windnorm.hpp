// Copyright 2026 The windnorm Authors.
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

#include "windnorm/core.hpp"
#include "windnorm/energy.hpp"
#include "windnorm/eval.hpp"
#include "windnorm/gwn.hpp"
#include "windnorm/io.hpp"
#include "windnorm/kdtree.hpp"
#include "windnorm/lbfgs.hpp"
#include "windnorm/optim.hpp"
#include "windnorm/parallel.hpp"
#include "windnorm/voronoi.hpp"
