#pragma once

#include <chrono>
#include <cstddef>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcppm/coupling.hpp"
#include "dcppm/experiments.hpp"
#include "dcppm/graph.hpp"
#include "dcppm/inference.hpp"
#include "dcppm/model.hpp"
#include "dcppm/stats.hpp"
#include "dcppm/tree.hpp"

namespace dcppm {

using json = nlohmann::json;

// ---- weight laws and parameters

inline json law_to_json(const WeightLaw& law) {
    json atoms = json::array();
    for (const Atom& a : law.atoms()) atoms.push_back({a.value, a.prob});
    return {{"atoms", atoms}};
}

inline WeightLaw law_from_json(const json& j) {
    const json& atoms = j.at("atoms");
    if (!atoms.is_array()) throw std::invalid_argument("\"atoms\" must be an array");
    std::vector<Atom> out;
    for (const json& a : atoms) {
        if (!a.is_array() || a.size() != 2) throw std::invalid_argument("each atom must be [value, prob]");
        out.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return make_weight_law(out);
}

inline json params_to_json(const ModelParams& p) { return {{"a", p.a()}, {"b", p.b()}, {"law", law_to_json(p.law())}}; }

inline ModelParams params_from_json(const json& j) {
    return ModelParams(j.at("a").get<double>(), j.at("b").get<double>(),
                       j.contains("law") ? law_from_json(j.at("law")) : WeightLaw::point_mass(1.0));
}

/// Accepts inline JSON text or a path to a JSON file.
inline json parse_json_or_file(const std::string& text) {
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (text[first] == '{' || text[first] == '[')) return json::parse(text);
    std::ifstream in(text);
    if (!in) throw std::invalid_argument("cannot open " + text);
    return json::parse(in);
}

// ---- trees

inline json tree_to_json(const LabeledTree& tree) {
    json nodes = json::array();
    for (const TreeNode& v : tree.nodes()) {
        json node = {{"spin", std::string(1, spin_char(v.spin))}, {"weight", v.weight}};
        node["parent"] = v.parent == kNoParent ? json(nullptr) : json(v.parent);
        nodes.push_back(std::move(node));
    }
    return {{"nodes", nodes}};
}

inline LabeledTree tree_from_json(const json& j) {
    std::vector<TreeNode> nodes;
    for (const json& node : j.at("nodes")) {
        TreeNode v;
        const std::string s = node.at("spin").get<std::string>();
        if (s.size() != 1) throw std::invalid_argument("spin must be \"+\" or \"-\"");
        v.spin = spin_from_char(s[0]);
        v.weight = node.at("weight").get<double>();
        const json& parent = node.at("parent");
        if (parent.is_null()) {
            if (!nodes.empty()) throw std::invalid_argument("only node 0 may lack a parent");
        } else {
            v.parent = parent.get<std::int32_t>();
            if (v.parent < 0 || static_cast<std::size_t>(v.parent) >= nodes.size())
                throw std::invalid_argument("parent must precede child");
            v.depth = nodes[v.parent].depth + 1;
        }
        nodes.push_back(v);
    }
    return LabeledTree(std::move(nodes));
}

// ---- results

inline json to_json(const MeanCI& m) {
    return {{"mean", m.mean}, {"sd", m.sd}, {"lo", m.lo}, {"hi", m.hi}, {"count", m.count}};
}

inline json to_json(const TvEstimate& t) { return {{"tv", t.tv}, {"lo", t.lo}, {"hi", t.hi}}; }

inline json to_json(const RootPosterior& p) { return {{"prob_plus", p.prob_plus}, {"delta", p.delta}}; }

inline json spins_to_json(std::span<const Spin> spins) {
    std::string s;
    for (Spin x : spins) s.push_back(spin_char(x));
    return s;
}

inline json to_json(const SpinEstimate& e) {
    return {{"assignment", spins_to_json(e.assignment)}, {"bisection", e.bisection}, {"degenerate", e.degenerate}};
}

inline json to_json(const DeltaEstimate& d) {
    return {{"delta", to_json(d.delta)}, {"extinct", d.extinct}, {"discarded", d.discarded}};
}

inline json to_json(const EigenCheck& e) {
    return {{"lambda1", e.lambda1}, {"lambda2", e.lambda2}, {"theory1", e.theory1},
            {"theory2", e.theory2}, {"cosine", e.cosine}};
}

inline json to_json(const CouplingReport& r) {
    json stats = json::array();
    for (const StatisticTv& s : r.statistics) {
        json entry = {{"statistic", statistic_name(s.statistic)}, {"applicable", s.applicable}};
        if (s.applicable) entry["tv"] = to_json(s.estimate);
        stats.push_back(std::move(entry));
    }
    json out = {{"n", r.n},
                {"radius", r.radius},
                {"trials", r.trials},
                {"seed", r.seed},
                {"statistics", stats},
                {"truncated_fraction", r.truncated_fraction},
                {"truncated_ci", {r.truncated_lo, r.truncated_hi}},
                {"growth_violations", r.growth_violations},
                {"tree_discards", r.tree_discards},
                {"warnings", r.warnings}};
    out["certified_radius"] = r.certified_radius ? json(*r.certified_radius) : json(nullptr);
    return out;
}

// ---- sweep configuration

inline SweepConfig sweep_config_from_json(const json& j) {
    SweepConfig c;
    if (j.contains("law")) c.law = law_from_json(j.at("law"));
    const json& grid = j.at("grid");
    if (grid.contains("ab")) {
        std::size_t i = 0;
        for (const json& p : grid.at("ab")) {
            c.grid.push_back({p.at(0).get<double>(), p.at(1).get<double>(), i, i});
            ++i;
        }
    } else if (grid.contains("stats")) {
        const double sum = grid.at("sum").get<double>();
        std::size_t i = 0;
        for (const json& s : grid.at("stats")) c.grid.push_back(grid_point_from_stat(s.get<double>(), sum, c.law, i++));
    } else if (grid.contains("a") && grid.contains("b")) {
        const auto as = grid.at("a").get<std::vector<double>>();
        const auto bs = grid.at("b").get<std::vector<double>>();
        for (std::size_t i = 0; i < as.size(); ++i)
            for (std::size_t k = 0; k < bs.size(); ++k) c.grid.push_back({as[i], bs[k], i, k});
    } else {
        throw std::invalid_argument("grid needs \"ab\", \"stats\" with \"sum\", or both \"a\" and \"b\"");
    }
    c.n_values = j.at("n").get<std::vector<std::size_t>>();
    c.trials = j.value("trials", c.trials);
    if (j.contains("estimators")) {
        c.estimators.clear();
        for (const json& e : j.at("estimators")) c.estimators.push_back(operator_from_name(e.get<std::string>()));
    }
    c.master_seed = j.value("seed", Seed{0});
    c.output = j.value("output", std::string("sweep.csv"));
    c.threads = j.value("threads", std::size_t{0});
    if (c.grid.empty() || c.n_values.empty() || c.estimators.empty())
        throw std::invalid_argument("sweep grid, n values and estimators must be non-empty");
    for (const GridPoint& p : c.grid) {
        const ModelParams params(p.a, p.b, c.law);
        for (std::size_t n : c.n_values)
            if (params.law().phi_max() * params.law().phi_max() * std::max(p.a, p.b) > static_cast<double>(n))
                throw std::invalid_argument("grid point gives edge probabilities above 1");
    }
    return c;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

inline json sweep_metadata(const SweepConfig& config, std::span<const SweepRow> rows) {
    json cells = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        json cell = {{"row", i}, {"seed", rows[i].seed}, {"degenerate", rows[i].degenerate}};
        if (!rows[i].error.empty()) cell["error"] = rows[i].error;
        cells.push_back(std::move(cell));
    }
    return {{"timestamp", utc_timestamp()},
            {"master_seed", config.master_seed},
            {"trials", config.trials},
            {"law", law_to_json(config.law)},
            {"cells", cells}};
}

/// Writes the CSV to config.output and metadata next to it.
inline void write_sweep_files(const SweepConfig& config, std::span<const SweepRow> rows) {
    std::ofstream csv(config.output, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + config.output);
    write_sweep_csv(csv, rows);
    std::ofstream meta(config.output + ".meta.json");
    if (!meta) throw std::runtime_error("cannot write metadata for " + config.output);
    meta << sweep_metadata(config, rows).dump(2) << '\n';
}

// ---- graph text format: "n a b", then "id spin weight" per vertex, then "u v" per edge

struct GraphFile {
    LabeledGraph graph;
    double a = 0.0;
    double b = 0.0;
};

inline void write_graph(std::ostream& os, const LabeledGraph& g, double a, double b) {
    os << std::setprecision(17);
    os << g.size() << ' ' << a << ' ' << b << '\n';
    for (VertexId v = 0; v < g.size(); ++v) os << v << ' ' << spin_char(g.spin(v)) << ' ' << g.weight(v) << '\n';
    for (const Edge& e : g.edges()) os << e.first << ' ' << e.second << '\n';
}

inline GraphFile read_graph(std::istream& is) {
    std::size_t n = 0;
    double a = 0.0, b = 0.0;
    if (!(is >> n >> a >> b)) throw std::invalid_argument("graph header must be \"n a b\"");
    std::vector<Spin> spins(n);
    std::vector<double> weights(n);
    std::vector<char> seen(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t id = 0;
        char s = 0;
        double w = 0.0;
        if (!(is >> id >> s >> w)) throw std::invalid_argument("truncated vertex list");
        if (id >= n || seen[id]) throw std::invalid_argument("vertex ids must be 0..n-1, each once");
        seen[id] = 1;
        spins[id] = spin_from_char(s);
        weights[id] = w;
    }
    std::vector<Edge> edges;
    VertexId u = 0, v = 0;
    while (is >> u >> v) edges.push_back({u, v});
    if (!is.eof()) throw std::invalid_argument("malformed edge line");
    return {LabeledGraph(std::move(spins), std::move(weights), edges), a, b};
}

/// Empirical law of a graph's vertex weights.
inline WeightLaw empirical_law(std::span<const double> weights) {
    if (weights.empty()) return WeightLaw::point_mass(1.0);
    std::map<double, double> counts;
    for (double w : weights) counts[w] += 1.0;
    std::vector<Atom> atoms;
    for (const auto& [w, c] : counts) atoms.push_back({w, c});
    return make_weight_law(atoms);
}

}  // namespace dcppm
