// Copyright 2026 The npcov Authors
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

#include <string>

#include "npcov/abstraction.hpp"

namespace npcov {

/// Versioned structured-text round trip of the full graph: hyperparameters,
/// abstract paths with weights, centroids, member ids, member paths and
/// activation snapshots. Identical builds produce identical bytes.
void save_decision_graph(const DecisionGraph& graph, const std::string& path);
DecisionGraph load_decision_graph(const std::string& path);

}  // namespace npcov
