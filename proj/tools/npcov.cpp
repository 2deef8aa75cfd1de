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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "npcov/dataset.hpp"
#include "npcov/evaluation.hpp"
#include "npcov/graph_io.hpp"
#include "npcov/lrp.hpp"
#include "npcov/model_io.hpp"
#include "npcov/report.hpp"

namespace {

using npcov::json;

int exit_code(npcov::ErrorKind kind) {
    switch (kind) {
        case npcov::ErrorKind::Io: return 2;
        case npcov::ErrorKind::Format: return 3;
        case npcov::ErrorKind::Config: return 4;
        case npcov::ErrorKind::Invariant: return 5;
    }
    return 1;
}

struct CommonOptions {
    std::string model;
    std::string images;
    std::string labels;
    std::string graph;
    std::string output = "-";
    std::string format = "text";
    double alpha = 0.9;
    double beta = 0.7;
    std::size_t clusters = 4;
    std::size_t buckets = 200;
    double upper_bound = 2.0;
    double nc_threshold = 0.0;
    std::size_t kmnc_sections = 1000;
    std::uint64_t seed = 0;
    int threads = 1;
    std::string criterion = "snpc";
};

npcov::Model load_model_arg(const std::string& arg) {
    std::string base = arg;
    const std::string suffix = ".manifest";
    if (base.size() >= suffix.size() &&
        base.compare(base.size() - suffix.size(), suffix.size(), suffix) == 0) {
        base.resize(base.size() - suffix.size());
    }
    return npcov::load_model(base + ".manifest", base + ".bin");
}

npcov::LabeledDataset load_suite(const std::string& images, const std::string& labels) {
    npcov::require(!images.empty() && !labels.empty(), npcov::ErrorKind::Config,
                   "dataset required: pass --images and --labels");
    return npcov::load_dataset(images, labels);
}

void emit(const json& doc, const CommonOptions& opt) {
    const std::string text = npcov::render_report(doc, opt.format == "json");
    if (opt.output == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(opt.output, std::ios::trunc);
    if (!out) npcov::fail(npcov::ErrorKind::Io, "cannot create '" + opt.output + "'");
    out << text;
    if (!out) npcov::fail(npcov::ErrorKind::Io, "write failed for '" + opt.output + "'");
}

json config_echo(const CommonOptions& opt, std::initializer_list<const char*> keys) {
    json doc;
    for (const char* key : keys) {
        const std::string k = key;
        if (k == "model") doc["model"] = opt.model;
        else if (k == "images") doc["images"] = opt.images;
        else if (k == "labels") doc["labels"] = opt.labels;
        else if (k == "graph") doc["graph"] = opt.graph;
        else if (k == "alpha") doc["alpha"] = opt.alpha;
        else if (k == "beta") doc["beta"] = opt.beta;
        else if (k == "clusters") doc["clusters"] = opt.clusters;
        else if (k == "buckets") doc["buckets"] = opt.buckets;
        else if (k == "upper_bound") doc["upper_bound"] = opt.upper_bound;
        else if (k == "nc_threshold") doc["nc_threshold"] = opt.nc_threshold;
        else if (k == "kmnc_sections") doc["kmnc_sections"] = opt.kmnc_sections;
        else if (k == "seed") doc["seed"] = opt.seed;
        else if (k == "threads") doc["threads"] = opt.threads;
        else if (k == "criterion") doc["criterion"] = opt.criterion;
    }
    return doc;
}

/// Graph hyperparameters win over conflicting flags; explicit conflicts get
/// a warning on the error stream.
void reconcile_with_graph(const npcov::DecisionGraph& graph, CommonOptions& opt,
                          const CLI::App* cmd) {
    auto warn = [](const std::string& flag, const std::string& file_value) {
        std::cerr << "warning: " << flag
                  << " differs from the decision-graph file; using the file value "
                  << file_value << "\n";
    };
    if (cmd->count("--alpha") && opt.alpha != graph.alpha)
        warn("--alpha", std::to_string(graph.alpha));
    if (cmd->count("--beta") && opt.beta != graph.beta)
        warn("--beta", std::to_string(graph.beta));
    if (cmd->count("--clusters") && opt.clusters != graph.clusters)
        warn("--clusters", std::to_string(graph.clusters));
    if (cmd->count("--buckets") && opt.buckets != graph.buckets)
        warn("--buckets", std::to_string(graph.buckets));
    if (cmd->count("--upper-bound") && opt.upper_bound != graph.upper_bound)
        warn("--upper-bound", std::to_string(graph.upper_bound));
    opt.alpha = graph.alpha;
    opt.beta = graph.beta;
    opt.clusters = graph.clusters;
    opt.buckets = graph.buckets;
    opt.upper_bound = graph.upper_bound;
}

int cmd_extract(CommonOptions& opt) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);
    const npcov::ExtractedPaths extracted =
        npcov::extract_paths(model, suite, opt.alpha, opt.threads);

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "alpha", "threads"});
    json rows = json::array();
    for (std::size_t i = 0; i < extracted.cdps.size(); ++i) {
        const npcov::Cdp& cdp = extracted.cdps[i];
        json row;
        row["id"] = i;
        row["class"] = cdp.predicted_class;
        row["g"] = cdp.g_value;
        row["width"] = cdp.width;
        row["degenerate"] = cdp.degenerate;
        row["layers"] = cdp.neurons.per_layer;
        rows.push_back(std::move(row));
    }
    doc["paths"] = std::move(rows);
    emit(doc, opt);
    return 0;
}

int cmd_build_graph(CommonOptions& opt, const std::string& graph_out) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset train = load_suite(opt.images, opt.labels);

    npcov::GraphBuildOptions options;
    options.alpha = opt.alpha;
    options.beta = opt.beta;
    options.clusters = opt.clusters;
    options.buckets = opt.buckets;
    options.upper_bound = opt.upper_bound;
    options.seed = opt.seed;
    options.threads = opt.threads;
    const npcov::DecisionGraph graph = npcov::build_decision_graph(model, train, options);
    npcov::save_decision_graph(graph, graph_out);

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "alpha", "beta",
                                      "clusters", "buckets", "upper_bound", "seed",
                                      "threads"});
    doc["config"]["graph_out"] = graph_out;
    doc["build"] = npcov::graph_build_report(graph);
    emit(doc, opt);
    return 0;
}

int cmd_coverage(CommonOptions& opt, const CLI::App* cmd,
                 const std::string& profile_images, const std::string& profile_labels) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);
    const npcov::Criterion criterion = npcov::criterion_from_string(opt.criterion);

    if (criterion == npcov::Criterion::Impartiality) {
        const double value = npcov::output_impartiality(model, suite, opt.threads);
        json doc;
        doc["config"] = config_echo(opt, {"model", "images", "labels", "criterion",
                                          "threads"});
        doc["criterion"] = opt.criterion;
        doc["impartiality"] = value;
        emit(doc, opt);
        return 0;
    }

    std::optional<npcov::DecisionGraph> graph;
    std::optional<npcov::ActivationProfile> profile;
    if (criterion == npcov::Criterion::Snpc || criterion == npcov::Criterion::Anpc) {
        npcov::require(!opt.graph.empty(), npcov::ErrorKind::Config,
                       "coverage: --graph is required for snpc/anpc");
        graph = npcov::load_decision_graph(opt.graph);
        reconcile_with_graph(*graph, opt, cmd);
    } else if (criterion == npcov::Criterion::Kmnc || criterion == npcov::Criterion::Nbc) {
        npcov::require(!profile_images.empty() && !profile_labels.empty(),
                       npcov::ErrorKind::Config,
                       "coverage: kmnc/nbc need --profile-images and --profile-labels");
        const npcov::LabeledDataset reference =
            npcov::load_dataset(profile_images, profile_labels);
        profile = npcov::profile_activations(model, reference, opt.threads);
    }

    npcov::CoverageConfig config;
    config.criterion = criterion;
    config.buckets = opt.buckets;
    config.upper_bound = opt.upper_bound;
    config.nc_threshold = opt.nc_threshold;
    config.kmnc_sections = opt.kmnc_sections;
    config.threads = opt.threads;

    const npcov::CoverageState state =
        npcov::coverage(model, suite, graph ? &*graph : nullptr,
                        profile ? &*profile : nullptr, config);

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "graph", "criterion",
                                      "alpha", "beta", "clusters", "buckets",
                                      "upper_bound", "nc_threshold", "kmnc_sections",
                                      "threads"});
    doc["report"] = npcov::coverage_report(state);
    emit(doc, opt);
    return 0;
}

int cmd_mask_eval(CommonOptions& opt, const std::vector<std::string>& scopes) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);

    std::optional<npcov::DecisionGraph> graph;
    if (!opt.graph.empty()) {
        graph = npcov::load_decision_graph(opt.graph);
        opt.alpha = graph->alpha;
        opt.beta = graph->beta;
        opt.clusters = graph->clusters;
    }

    std::vector<npcov::MaskReport> reports;
    for (const std::string& scope : scopes) {
        if (scope == "cdp") {
            reports.push_back(npcov::inconsistency_rate(
                model, suite, npcov::MaskScope::InputCdp, opt.alpha, nullptr,
                opt.threads));
        } else if (scope == "ncdp") {
            reports.push_back(npcov::inconsistency_rate(
                model, suite, npcov::MaskScope::InputNcdp, opt.alpha, nullptr,
                opt.threads));
        } else if (scope == "abstract-cdp" || scope == "abstract-ncdp") {
            npcov::require(graph.has_value(), npcov::ErrorKind::Config,
                           "mask-eval: abstract scopes need --graph");
            const auto mask_scope = scope == "abstract-cdp"
                                        ? npcov::MaskScope::AbstractCdp
                                        : npcov::MaskScope::AbstractNcdp;
            reports.push_back(npcov::inconsistency_rate(model, suite, mask_scope,
                                                        opt.alpha, &*graph, opt.threads));
        } else if (scope == "quintiles") {
            for (npcov::MaskReport& r :
                 npcov::quintile_mask(model, suite, opt.alpha, opt.threads)) {
                reports.push_back(std::move(r));
            }
        } else {
            npcov::fail(npcov::ErrorKind::Config, "mask-eval: unknown scope '" + scope +
                                                      "'");
        }
    }

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "graph", "alpha",
                                      "threads"});
    doc.update(npcov::mask_report_json(reports));
    emit(doc, opt);
    return 0;
}

int cmd_tune(CommonOptions& opt, const std::vector<double>& alpha_grid,
             const std::vector<double>& beta_grid, const std::vector<std::size_t>& k_grid,
             double feasibility) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset train = load_suite(opt.images, opt.labels);
    const npcov::TuneResult result = npcov::tune_hyperparameters(
        model, train, alpha_grid, beta_grid, k_grid, feasibility, opt.seed, opt.threads);

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "seed", "threads"});
    doc.update(npcov::tune_report_json(result));
    emit(doc, opt);
    return 0;
}

int cmd_similarity(CommonOptions& opt, std::size_t per_class) {
    const npcov::Model model = load_model_arg(opt.model);
    const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);
    std::optional<npcov::DecisionGraph> graph;
    if (!opt.graph.empty()) {
        graph = npcov::load_decision_graph(opt.graph);
        opt.alpha = graph->alpha;
    }
    const npcov::SimilarityReport report = npcov::similarity_study(
        model, suite, opt.alpha, per_class, graph ? &*graph : nullptr, opt.threads);

    json doc;
    doc["config"] = config_echo(opt, {"model", "images", "labels", "graph", "alpha",
                                      "threads"});
    doc["config"]["per_class"] = per_class;
    doc["similarity"] = npcov::similarity_report_json(report);
    emit(doc, opt);
    return 0;
}

int cmd_report(CommonOptions& opt, const CLI::App* cmd, const std::string& kind,
               const std::string& base_images, const std::string& base_labels,
               const std::vector<std::string>& suite_args,
               const std::vector<std::string>& criteria_list,
               const std::string& profile_images, const std::string& profile_labels) {
    const npcov::Model model = load_model_arg(opt.model);

    std::optional<npcov::DecisionGraph> graph;
    if (!opt.graph.empty()) {
        graph = npcov::load_decision_graph(opt.graph);
        reconcile_with_graph(*graph, opt, cmd);
    }
    std::optional<npcov::ActivationProfile> profile;
    if (!profile_images.empty() || !profile_labels.empty()) {
        npcov::require(!profile_images.empty() && !profile_labels.empty(),
                       npcov::ErrorKind::Config,
                       "report: pass both --profile-images and --profile-labels");
        const npcov::LabeledDataset reference =
            npcov::load_dataset(profile_images, profile_labels);
        profile = npcov::profile_activations(model, reference, opt.threads);
    }

    npcov::CoverageConfig config;
    config.criterion = npcov::criterion_from_string(opt.criterion);
    config.buckets = opt.buckets;
    config.upper_bound = opt.upper_bound;
    config.nc_threshold = opt.nc_threshold;
    config.kmnc_sections = opt.kmnc_sections;
    config.threads = opt.threads;

    json doc;
    doc["config"] = config_echo(opt, {"model", "graph", "criterion", "buckets",
                                      "upper_bound", "nc_threshold", "kmnc_sections",
                                      "seed", "threads"});
    doc["config"]["kind"] = kind;

    if (kind == "impartiality") {
        const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);
        doc["config"]["images"] = opt.images;
        doc["config"]["labels"] = opt.labels;
        doc["impartiality"] = npcov::output_impartiality(model, suite, opt.threads);
    } else if (kind == "ncov") {
        npcov::require(!base_images.empty() && !base_labels.empty(),
                       npcov::ErrorKind::Config,
                       "report: ncov needs --base-images and --base-labels");
        npcov::require(suite_args.size() >= 2, npcov::ErrorKind::Config,
                       "report: ncov needs at least two --suite entries");
        const npcov::LabeledDataset base = npcov::load_dataset(base_images, base_labels);
        std::vector<npcov::LabeledDataset> suites;
        for (const std::string& arg : suite_args) {
            const auto comma = arg.find(',');
            npcov::require(comma != std::string::npos, npcov::ErrorKind::Config,
                           "report: --suite expects 'images,labels'");
            suites.push_back(npcov::load_dataset(arg.substr(0, comma),
                                                 arg.substr(comma + 1)));
        }
        const npcov::NcovResult result = npcov::normalized_coverage_change(
            model, base, suites, graph ? &*graph : nullptr,
            profile ? &*profile : nullptr, config);
        doc["config"]["base_images"] = base_images;
        doc["config"]["base_labels"] = base_labels;
        doc["config"]["suites"] = suite_args;
        doc.update(npcov::ncov_report_json(result));
    } else if (kind == "timing") {
        const npcov::LabeledDataset suite = load_suite(opt.images, opt.labels);
        std::vector<npcov::Criterion> criteria;
        for (const std::string& name : criteria_list) {
            criteria.push_back(npcov::criterion_from_string(name));
        }
        const std::vector<npcov::TimingEntry> entries =
            npcov::timing(model, suite, criteria, graph ? &*graph : nullptr,
                          profile ? &*profile : nullptr, config);
        doc["config"]["images"] = opt.images;
        doc["config"]["labels"] = opt.labels;
        doc.update(npcov::timing_report_json(entries));
    } else {
        npcov::fail(npcov::ErrorKind::Config, "report: unknown kind '" + kind + "'");
    }
    emit(doc, opt);
    return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool with_dataset = true) {
    cmd->add_option("--model", opt.model, "model file base name or .manifest path")
        ->required();
    if (with_dataset) {
        cmd->add_option("--images", opt.images, "image file");
        cmd->add_option("--labels", opt.labels, "label file");
    }
    cmd->add_option("--output", opt.output, "report destination ('-' for stdout)");
    cmd->add_option("--format", opt.format, "report format")
        ->check(CLI::IsMember({"text", "json"}));
    cmd->add_option("--threads", opt.threads, "worker threads")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opt.seed, "random seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"critical-decision-path coverage for feed-forward classifiers"};
    app.require_subcommand(1);

    CommonOptions opt;

    auto* extract = app.add_subcommand("extract", "dump critical decision paths");
    add_common(extract, opt);
    extract->add_option("--alpha", opt.alpha, "relevance mass threshold");

    std::string graph_out;
    auto* build = app.add_subcommand("build-graph", "cluster paths into a decision graph");
    add_common(build, opt);
    build->add_option("--alpha", opt.alpha, "relevance mass threshold");
    build->add_option("--beta", opt.beta, "neuron weight threshold");
    build->add_option("--clusters", opt.clusters, "clusters per class");
    build->add_option("--buckets", opt.buckets, "coverage buckets");
    build->add_option("--upper-bound", opt.upper_bound, "activation distance bound");
    build->add_option("--graph-out", graph_out, "decision graph destination")->required();

    std::string profile_images, profile_labels;
    auto* cover = app.add_subcommand("coverage", "score a test suite");
    add_common(cover, opt);
    cover->add_option("--graph", opt.graph, "decision graph file");
    cover->add_option("--criterion", opt.criterion, "coverage criterion")
        ->check(CLI::IsMember({"snpc", "anpc", "nc", "kmnc", "nbc", "impartiality"}));
    cover->add_option("--alpha", opt.alpha, "relevance mass threshold");
    cover->add_option("--beta", opt.beta, "neuron weight threshold");
    cover->add_option("--clusters", opt.clusters, "clusters per class");
    cover->add_option("--buckets", opt.buckets, "coverage buckets");
    cover->add_option("--upper-bound", opt.upper_bound, "activation distance bound");
    cover->add_option("--nc-threshold", opt.nc_threshold, "activation threshold");
    cover->add_option("--kmnc-sections", opt.kmnc_sections, "sections per neuron");
    cover->add_option("--profile-images", profile_images, "profiling image file");
    cover->add_option("--profile-labels", profile_labels, "profiling label file");

    std::vector<std::string> scopes{"cdp", "ncdp", "quintiles"};
    auto* mask = app.add_subcommand("mask-eval", "masked-inference inconsistency rates");
    add_common(mask, opt);
    mask->add_option("--alpha", opt.alpha, "relevance mass threshold");
    mask->add_option("--graph", opt.graph, "decision graph file");
    mask->add_option("--scope", scopes,
                     "scopes: cdp, ncdp, quintiles, abstract-cdp, abstract-ncdp")
        ->delimiter(',');

    std::vector<double> alpha_grid{0.7, 0.8, 0.9, 1.0};
    std::vector<double> beta_grid{0.6, 0.7, 0.8, 0.9};
    std::vector<std::size_t> k_grid{1, 4, 7};
    double feasibility = 0.9;
    auto* tune = app.add_subcommand("tune", "sweep hyperparameter grids");
    add_common(tune, opt);
    tune->add_option("--alpha-grid", alpha_grid, "alpha candidates")->delimiter(',');
    tune->add_option("--beta-grid", beta_grid, "beta candidates")->delimiter(',');
    tune->add_option("--k-grid", k_grid, "cluster count candidates")->delimiter(',');
    tune->add_option("--feasibility", feasibility,
                     "minimum abstract-path inconsistency to qualify");

    std::size_t per_class = 100;
    auto* similarity = app.add_subcommand("similarity", "path similarity statistics");
    add_common(similarity, opt);
    similarity->add_option("--alpha", opt.alpha, "relevance mass threshold");
    similarity->add_option("--graph", opt.graph, "decision graph file");
    similarity->add_option("--per-class", per_class, "samples per class");

    std::string kind = "impartiality";
    std::string base_images, base_labels;
    std::vector<std::string> suite_args;
    std::vector<std::string> criteria_list{"snpc", "anpc", "nc", "kmnc", "nbc"};
    auto* report = app.add_subcommand("report", "aggregate study reports");
    add_common(report, opt);
    report->add_option("--kind", kind, "ncov, impartiality, or timing")
        ->check(CLI::IsMember({"ncov", "impartiality", "timing"}));
    report->add_option("--graph", opt.graph, "decision graph file");
    report->add_option("--criterion", opt.criterion, "coverage criterion")
        ->check(CLI::IsMember({"snpc", "anpc", "nc", "kmnc", "nbc"}));
    report->add_option("--alpha", opt.alpha, "relevance mass threshold");
    report->add_option("--beta", opt.beta, "neuron weight threshold");
    report->add_option("--clusters", opt.clusters, "clusters per class");
    report->add_option("--buckets", opt.buckets, "coverage buckets");
    report->add_option("--upper-bound", opt.upper_bound, "activation distance bound");
    report->add_option("--nc-threshold", opt.nc_threshold, "activation threshold");
    report->add_option("--kmnc-sections", opt.kmnc_sections, "sections per neuron");
    report->add_option("--base-images", base_images, "base suite images (ncov)");
    report->add_option("--base-labels", base_labels, "base suite labels (ncov)");
    report->add_option("--suite", suite_args, "suite as 'images,labels' (repeatable)");
    report->add_option("--criteria", criteria_list, "criteria to time")->delimiter(',');
    report->add_option("--profile-images", profile_images, "profiling image file");
    report->add_option("--profile-labels", profile_labels, "profiling label file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 4;
    }

    try {
        if (app.got_subcommand(extract)) return cmd_extract(opt);
        if (app.got_subcommand(build)) return cmd_build_graph(opt, graph_out);
        if (app.got_subcommand(cover))
            return cmd_coverage(opt, cover, profile_images, profile_labels);
        if (app.got_subcommand(mask)) return cmd_mask_eval(opt, scopes);
        if (app.got_subcommand(tune))
            return cmd_tune(opt, alpha_grid, beta_grid, k_grid, feasibility);
        if (app.got_subcommand(similarity)) return cmd_similarity(opt, per_class);
        if (app.got_subcommand(report))
            return cmd_report(opt, report, kind, base_images, base_labels, suite_args,
                              criteria_list, profile_images, profile_labels);
        std::cerr << "error: config: no subcommand selected\n";
        return 4;
    } catch (const npcov::Error& e) {
        std::cerr << "error: " << npcov::to_string(e.kind()) << ": " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 1;
    }
}
