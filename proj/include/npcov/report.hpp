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

#include <json.hpp>

#include "npcov/abstraction.hpp"
#include "npcov/coverage.hpp"
#include "npcov/evaluation.hpp"

namespace npcov {

using json = nlohmann::ordered_json;

json coverage_report(const CoverageState& state);
json mask_report_json(const std::vector<MaskReport>& reports);
json similarity_report_json(const SimilarityReport& report);
json tune_report_json(const TuneResult& result);
json ncov_report_json(const NcovResult& result);
json timing_report_json(const std::vector<TimingEntry>& entries);
/// Cluster sizes, widths and empty-layer flags of a built graph.
json graph_build_report(const DecisionGraph& graph);

/// Text form: scalar fields as `key: value` lines, arrays of uniform
/// objects as aligned column tables, nested objects as indented sections.
std::string render_text(const json& doc);

/// Serializes as indented structured text (deterministic bytes) or via
/// render_text, per `as_json`.
std::string render_report(const json& doc, bool as_json);

}  // namespace npcov
