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

#include "npcov/graph_io.hpp"

#include <fstream>

#include <json.hpp>

namespace npcov {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr int kGraphVersion = 1;

ordered_json path_to_json(const AbstractPath& path) {
    ordered_json e;
    e["cluster"] = path.cluster_index;
    e["centroid"] = path.centroid;
    e["layers"] = ordered_json::array();
    for (std::size_t l = 0; l < path.neurons.per_layer.size(); ++l) {
        ordered_json layer;
        layer["neurons"] = path.neurons.per_layer[l];
        layer["weights"] = path.weights[l];
        e["layers"].push_back(std::move(layer));
    }
    e["members"] = ordered_json::array();
    for (const GraphMember& member : path.members) {
        ordered_json m;
        m["id"] = member.input_id;
        m["cdp"] = member.cdp.per_layer;
        m["activations"] = member.activations;
        e["members"].push_back(std::move(m));
    }
    return e;
}

AbstractPath path_from_json(const ordered_json& e, int class_id) {
    AbstractPath path;
    path.class_id = class_id;
    path.cluster_index = e.at("cluster").get<int>();
    path.centroid = e.at("centroid").get<std::vector<double>>();
    for (const ordered_json& layer : e.at("layers")) {
        path.neurons.per_layer.push_back(layer.at("neurons").get<std::vector<int>>());
        path.weights.push_back(layer.at("weights").get<std::vector<double>>());
    }
    for (const ordered_json& m : e.at("members")) {
        GraphMember member;
        member.input_id = m.at("id").get<int>();
        member.cdp.per_layer = m.at("cdp").get<std::vector<std::vector<int>>>();
        member.activations = m.at("activations").get<std::vector<std::vector<double>>>();
        path.members.push_back(std::move(member));
    }
    return path;
}

}  // namespace

void save_decision_graph(const DecisionGraph& graph, const std::string& path) {
    graph.check();
    ordered_json doc;
    doc["version"] = kGraphVersion;
    doc["alpha"] = graph.alpha;
    doc["beta"] = graph.beta;
    doc["clusters"] = graph.clusters;
    doc["buckets"] = graph.buckets;
    doc["upper_bound"] = graph.upper_bound;
    doc["seed"] = graph.seed;
    doc["num_classes"] = graph.num_classes;
    doc["layer_sizes"] = graph.layer_sizes;
    doc["classes"] = ordered_json::array();
    for (std::size_t y = 0; y < graph.per_class.size(); ++y) {
        ordered_json entry;
        entry["class"] = y;
        entry["paths"] = ordered_json::array();
        for (const AbstractPath& p : graph.per_class[y]) {
            entry["paths"].push_back(path_to_json(p));
        }
        doc["classes"].push_back(std::move(entry));
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot create '" + path + "'");
    out << doc.dump(2) << '\n';
    if (!out) fail(ErrorKind::Io, "write failed for '" + path + "'");
}

DecisionGraph load_decision_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open '" + path + "'");
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const std::exception& e) {
        fail(ErrorKind::Format, "'" + path + "': " + e.what());
    }

    DecisionGraph graph;
    try {
        const int version = doc.at("version").get<int>();
        require(version == kGraphVersion, ErrorKind::Format,
                "unsupported decision-graph version " + std::to_string(version) +
                    " (expected " + std::to_string(kGraphVersion) + ")");
        graph.alpha = doc.at("alpha").get<double>();
        graph.beta = doc.at("beta").get<double>();
        graph.clusters = doc.at("clusters").get<std::size_t>();
        graph.buckets = doc.at("buckets").get<std::size_t>();
        graph.upper_bound = doc.at("upper_bound").get<double>();
        graph.seed = doc.at("seed").get<std::uint64_t>();
        graph.num_classes = doc.at("num_classes").get<std::size_t>();
        graph.layer_sizes = doc.at("layer_sizes").get<std::vector<std::size_t>>();
        graph.per_class.resize(graph.num_classes);
        for (const ordered_json& entry : doc.at("classes")) {
            const auto y = entry.at("class").get<std::size_t>();
            require(y < graph.num_classes, ErrorKind::Format,
                    "'" + path + "': class index out of range");
            for (const ordered_json& p : entry.at("paths")) {
                graph.per_class[y].push_back(path_from_json(p, static_cast<int>(y)));
            }
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorKind::Format, "'" + path + "': " + e.what());
    }
    graph.check();
    return graph;
}

}  // namespace npcov
