// Command-line front end. Every subcommand prints one JSON document on stdout
// (sweep writes CSV + metadata files and prints a short summary).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dcppm/dcppm.hpp"

using namespace dcppm;

namespace {

struct ModelFlags {
    double a = 3.0;
    double b = 1.0;
    std::string law = R"({"atoms": [[1, 1]]})";

    void add_to(CLI::App* app) {
        app->add_option("--a", a, "same-community rate")->capture_default_str();
        app->add_option("--b", b, "cross-community rate")->capture_default_str();
        app->add_option("--law", law, "weight law as inline JSON or a JSON file")->capture_default_str();
    }
    ModelParams params() const { return ModelParams(a, b, law_from_json(parse_json_or_file(law))); }
};

GraphFile load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path);
    return read_graph(in);
}

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Degree-corrected planted partition lab"};
    app.require_subcommand(1);
    Seed seed = 1;

    // sample
    ModelFlags sample_model;
    std::size_t sample_n = 1000;
    std::string graph_out;
    auto* sample = app.add_subcommand("sample", "sample a graph");
    sample_model.add_to(sample);
    sample->add_option("--n", sample_n)->capture_default_str();
    sample->add_option("--seed", seed)->capture_default_str();
    sample->add_option("--graph-out", graph_out, "write the graph in text format");

    // tree
    ModelFlags tree_model;
    int tree_depth = 3;
    std::string tree_root = "plain";
    bool tree_typed = false;
    auto* tree = app.add_subcommand("tree", "sample a branching-process tree");
    tree_model.add_to(tree);
    tree->add_option("--depth", tree_depth)->capture_default_str();
    tree->add_option("--root", tree_root, "root weight law")->check(CLI::IsMember({"plain", "size-biased"}));
    tree->add_flag("--typed", tree_typed, "use the typed (signed-weight) sampler");
    tree->add_option("--seed", seed)->capture_default_str();

    // couple
    ModelFlags couple_model;
    std::size_t couple_n = 10000, couple_trials = 1000, couple_resamples = 1000;
    int couple_radius = 1;
    std::vector<std::string> couple_stats;
    auto* couple = app.add_subcommand("couple", "compare graph neighbourhoods with the branching process");
    couple_model.add_to(couple);
    couple->add_option("--n", couple_n)->capture_default_str();
    couple->add_option("--radius", couple_radius)->capture_default_str();
    couple->add_option("--trials", couple_trials)->capture_default_str();
    couple->add_option("--resamples", couple_resamples, "bootstrap resamples")->capture_default_str();
    couple->add_option("--stat", couple_stats, "statistics (default: all)")
        ->check(CLI::IsMember({"root_degree", "degree_and_same_spin", "generation_sizes", "child_weight_atoms"}));
    couple->add_option("--seed", seed)->capture_default_str();

    // delta-m
    ModelFlags delta_model;
    std::vector<int> delta_depths{2, 10};
    std::size_t delta_trials = 10000;
    auto* delta = app.add_subcommand("delta-m", "estimate E[Delta_m] on the branching process");
    delta_model.add_to(delta);
    delta->add_option("--m", delta_depths, "boundary depths")->capture_default_str();
    delta->add_option("--trials", delta_trials)->capture_default_str();
    delta->add_option("--seed", seed)->capture_default_str();

    // posterior
    std::string post_graph;
    VertexId post_u = 0;
    std::vector<std::string> post_anchor;
    std::size_t post_population = 0;
    auto* posterior = app.add_subcommand("posterior", "exact spin posterior by enumeration (n <= 24)");
    posterior->add_option("--graph-in", post_graph)->required();
    posterior->add_option("--u", post_u)->required();
    posterior->add_option("--anchor", post_anchor, "vertex and spin, e.g. --anchor 3 +")->expected(2);
    posterior->add_option("--population", post_population, "N in the edge probabilities (default: n)");

    // estimate
    std::string est_graph, est_method = "nonbacktracking";
    auto* estimate = app.add_subcommand("estimate", "spectral bisection of a graph");
    estimate->add_option("--graph-in", est_graph)->required();
    estimate->add_option("--method", est_method)->check(CLI::IsMember({"adjacency", "nonbacktracking"}));
    estimate->add_option("--seed", seed)->capture_default_str();

    // sweep
    std::string sweep_path;
    auto* sweep = app.add_subcommand("sweep", "threshold sweep from a JSON config");
    sweep->add_option("--config", sweep_path)->required();

    // eigencheck
    ModelFlags eig_model;
    std::size_t eig_n = 2000;
    auto* eig = app.add_subcommand("eigencheck", "eigenvalues of the conditional expectation matrix");
    eig_model.add_to(eig);
    eig->add_option("--n", eig_n)->capture_default_str();
    eig->add_option("--seed", seed)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sample) {
            const ModelParams p = sample_model.params();
            const LabeledGraph g = sample_dcppm(sample_n, p, seed);
            if (!graph_out.empty()) {
                std::ofstream out(graph_out);
                if (!out) throw std::runtime_error("cannot write " + graph_out);
                write_graph(out, g, p.a(), p.b());
            }
            print({{"n", g.size()},
                   {"edges", g.edge_count()},
                   {"largest_component_fraction", largest_component_fraction(g)},
                   {"params", params_to_json(p)},
                   {"seed", seed}});
        } else if (*tree) {
            const ModelParams p = tree_model.params();
            const RootLaw root = tree_root == "plain" ? RootLaw::plain : RootLaw::size_biased;
            const TreeSample s =
                tree_typed ? sample_tpoi_typed(p, tree_depth, seed, root) : sample_tpoi(p, tree_depth, root, seed);
            json out = tree_to_json(s.tree);
            out["discarded"] = s.discarded;
            print(out);
        } else if (*couple) {
            std::vector<CouplingStatistic> stats;
            for (const auto& s : couple_stats) stats.push_back(statistic_from_name(s));
            if (stats.empty()) stats = all_coupling_statistics();
            CouplingOptions opts;
            opts.bootstrap_resamples = couple_resamples;
            print(to_json(coupling_experiment(couple_n, couple_model.params(), couple_radius, couple_trials, seed,
                                              stats, opts)));
        } else if (*delta) {
            const ModelParams p = delta_model.params();
            json rows = json::array();
            for (int m : delta_depths) {
                json row = to_json(estimate_expected_delta(p, m, delta_trials, derive_seed(seed, {std::uint64_t(m)})));
                row["m"] = m;
                rows.push_back(std::move(row));
            }
            print({{"params", params_to_json(p)}, {"trials", delta_trials}, {"seed", seed}, {"estimates", rows}});
        } else if (*posterior) {
            const GraphFile f = load_graph(post_graph);
            const ModelParams p(f.a, f.b, empirical_law(f.graph.weights()));
            std::optional<Anchor> anchor;
            if (!post_anchor.empty()) {
                if (post_anchor[1].size() != 1) throw std::invalid_argument("anchor spin must be + or -");
                anchor = Anchor{static_cast<VertexId>(std::stoul(post_anchor[0])), spin_from_char(post_anchor[1][0])};
            }
            json out = to_json(graph_posterior_bruteforce(f.graph, p, post_u, anchor, post_population));
            out["u"] = post_u;
            print(out);
        } else if (*estimate) {
            const GraphFile f = load_graph(est_graph);
            const SpinEstimate e = spectral_bisection(f.graph, operator_from_name(est_method), seed);
            json out = to_json(e);
            out["method"] = est_method;
            out["overlap_with_file_spins"] = overlap(f.graph.spins(), e);
            print(out);
        } else if (*sweep) {
            const SweepConfig config = sweep_config_from_json(parse_json_or_file(sweep_path));
            const std::vector<SweepRow> rows = threshold_sweep(config);
            write_sweep_files(config, rows);
            std::size_t failed = 0;
            for (const auto& r : rows) failed += !r.error.empty();
            print({{"rows", rows.size()}, {"failed_cells", failed}, {"csv", config.output},
                   {"metadata", config.output + ".meta.json"}});
        } else if (*eig) {
            print(to_json(expected_matrix_eigencheck(eig_n, eig_model.params(), seed)));
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
