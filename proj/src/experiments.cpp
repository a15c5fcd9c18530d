#include "srg/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "srg/io.hpp"
#include "srg/rng.hpp"

namespace srg {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

std::uint64_t trial_seed(std::uint64_t base, int trial) {
    return Rng(base).child(static_cast<std::uint64_t>(trial) + 1).next();
}

double mean_marginal_error(const std::map<VarId, Eigen::ArrayXd>& marginals,
                           const ExactResult& exact) {
    double sum = 0.0;
    for (const auto& [v, m] : marginals)
        sum += (m - exact.marginals[static_cast<std::size_t>(v)]).abs().maxCoeff();
    return marginals.empty() ? 0.0 : sum / static_cast<double>(marginals.size());
}

struct MethodOutcome {
    bool converged = false;
    int iterations = 0;
    double max_err = 0.0;
    double mean_err = 0.0;
    double free_energy = 0.0;
    double extra = 0.0; // experiment-specific (e.g. total counting number)
};

MethodOutcome eval_method(const RegionGraph& rg, const FactorGraph& fg, const ExactResult& oracle,
                          const GbpConfig& cfg) {
    auto res = run_gbp(rg, fg, cfg);
    auto marg = node_marginals(rg, res.beliefs);
    MethodOutcome o;
    o.converged = res.converged;
    o.iterations = res.iterations;
    o.max_err = max_marginal_error(marg, oracle);
    o.mean_err = mean_marginal_error(marg, oracle);
    o.free_energy = res.free_energy;
    o.extra = total_counting_number(rg);
    return o;
}

using Row = std::vector<std::string>;

/// Runs `fn(trial)` for every trial, possibly concurrently, and concatenates
/// the returned row blocks in trial order.
std::vector<Row> run_trials(int trials, int jobs, const std::function<std::vector<Row>(int)>& fn) {
    std::vector<std::vector<Row>> blocks(static_cast<std::size_t>(trials));
    if (jobs <= 1) {
        for (int t = 0; t < trials; ++t) blocks[static_cast<std::size_t>(t)] = fn(t);
    } else {
        std::vector<std::future<std::vector<Row>>> futs;
        for (int t = 0; t < trials; ++t)
            futs.push_back(std::async(std::launch::async, fn, t));
        for (int t = 0; t < trials; ++t) blocks[static_cast<std::size_t>(t)] = futs[static_cast<std::size_t>(t)].get();
    }
    std::vector<Row> rows;
    for (auto& b : blocks)
        for (auto& r : b) rows.push_back(std::move(r));
    return rows;
}

/// Aggregate rows: group trial rows by the given key columns and average every
/// numeric column; the trial column becomes "mean" and the seed column empty.
void append_aggregates(std::vector<Row>& rows, const std::vector<std::string>& header,
                       const std::vector<std::size_t>& group_cols) {
    std::map<std::vector<std::string>, std::vector<const Row*>> groups;
    for (const auto& r : rows) {
        std::vector<std::string> key;
        for (std::size_t c : group_cols) key.push_back(r[c]);
        groups[key].push_back(&r);
    }
    std::vector<Row> aggs;
    for (const auto& [key, members] : groups) {
        Row agg(header.size());
        agg[0] = members.front()->at(0); // experiment name
        agg[1] = "mean";
        agg[2] = "";
        for (std::size_t c = 3; c < header.size(); ++c) {
            bool in_key = std::find(group_cols.begin(), group_cols.end(), c) != group_cols.end();
            if (in_key) {
                agg[c] = members.front()->at(c);
                continue;
            }
            bool numeric = true;
            double sum = 0.0;
            for (const Row* m : members) {
                try {
                    std::size_t pos = 0;
                    sum += std::stod(m->at(c), &pos);
                    if (pos != m->at(c).size()) numeric = false;
                } catch (const std::exception&) {
                    numeric = false;
                }
                if (!numeric) break;
            }
            agg[c] = numeric ? fmt(sum / static_cast<double>(members.size())) : "";
        }
        aggs.push_back(std::move(agg));
    }
    std::sort(aggs.begin(), aggs.end());
    for (auto& a : aggs) rows.push_back(std::move(a));
}

std::string triangle_label(const Triangle& t, const FactorGraph& fg) {
    if (t[0] < 0) return "-";
    std::string s;
    for (int i = 0; i < 3; ++i)
        s += (i ? "|" : "") + fg.variables()[static_cast<std::size_t>(t[i])].name;
    return s;
}

// ---- individual experiments ----

ExperimentResult table1(const ExperimentSpec& spec, bool bipartite) {
    ExperimentResult out;
    out.header = {"experiment", "trial",    "seed",        "method",      "converged",
                  "iterations", "max_marginal_error", "mean_marginal_error", "free_energy",
                  "total_counting_number", "wall_time_ms"};
    const std::string exp_name = to_string(spec.name);
    GbpConfig cfg = spec.gbp;
    cfg.max_iters = std::max(cfg.max_iters, 4000);

    auto one_trial = [&](int t) {
        std::uint64_t s = trial_seed(spec.seed, t);
        FactorGraph fg = bipartite ? random_bipartite_model(10, 10, s)
                                   : random_complete_model(6, s, PotentialStyle::uniform_small);
        auto oracle = exact_inference(fg);
        std::vector<std::pair<std::string, RegionGraph>> methods;
        methods.push_back({"bethe", bethe(fg)});
        for (int w = 1; w <= 3; ++w) methods.push_back({"star" + std::to_string(w), star_rg(fg, w)});
        for (int w = 1; w <= 3; ++w)
            methods.push_back({"star" + std::to_string(w) + "+1", star_rg_plus_extra(fg, w)});
        std::vector<Row> rows;
        for (const auto& [label, rg] : methods) {
            double t0 = now_ms();
            auto o = eval_method(rg, fg, oracle, cfg);
            rows.push_back({exp_name, std::to_string(t), std::to_string(s), label,
                            o.converged ? "1" : "0", std::to_string(o.iterations), fmt(o.max_err),
                            fmt(o.mean_err), fmt(o.free_energy), fmt(o.extra),
                            fmt(now_ms() - t0)});
        }
        return rows;
    };
    out.rows = run_trials(spec.trials, spec.jobs, one_trial);
    append_aggregates(out.rows, out.header, {3});
    return out;
}

ExperimentResult grid_sweep(const ExperimentSpec& spec) {
    ExperimentResult out;
    out.header = {"experiment", "trial",    "seed",        "method",      "converged",
                  "iterations", "max_marginal_error", "mean_marginal_error", "free_energy",
                  "total_counting_number", "wall_time_ms"};
    const std::string exp_name = to_string(spec.name);
    struct Case {
        int rows, cols, br, bc;
    };
    const std::vector<Case> cases = {{4, 4, 2, 2}, {4, 4, 3, 3}, {4, 4, 4, 3},
                                     {4, 6, 2, 2}, {4, 6, 3, 3}, {4, 6, 4, 3}};
    auto one_trial = [&](int t) {
        std::uint64_t s = trial_seed(spec.seed, t);
        std::vector<Row> rows;
        GeneratorOptions opt;
        opt.grid_biases = true; // bias-free grids are spin symmetric: every method is exact
        for (const auto& c : cases) {
            FactorGraph fg = grid_model(c.rows, c.cols, s, PotentialStyle::gaussian, opt);
            auto oracle = exact_inference(fg);
            RegionGraph rg = grid_boxes(fg, c.rows, c.cols, c.br, c.bc);
            std::string label = "g" + std::to_string(c.rows) + "x" + std::to_string(c.cols) + "_b" +
                                std::to_string(c.br) + "x" + std::to_string(c.bc);
            double t0 = now_ms();
            auto o = eval_method(rg, fg, oracle, spec.gbp);
            rows.push_back({exp_name, std::to_string(t), std::to_string(s), label,
                            o.converged ? "1" : "0", std::to_string(o.iterations), fmt(o.max_err),
                            fmt(o.mean_err), fmt(o.free_energy), fmt(o.extra),
                            fmt(now_ms() - t0)});
        }
        return rows;
    };
    out.rows = run_trials(spec.trials, spec.jobs, one_trial);
    append_aggregates(out.rows, out.header, {3});
    return out;
}

ExperimentResult pursuit_fig6(const ExperimentSpec& spec) {
    ExperimentResult out;
    out.header = {"experiment", "trial", "seed",      "method",     "step",
                  "triangle",   "accepted", "score",  "max_marginal_error", "free_energy",
                  "iterations", "converged", "wall_time_ms"};
    const std::string exp_name = to_string(spec.name);
    const int max_tri = spec.max_triangles >= 0 ? spec.max_triangles : 35;

    auto one_trial = [&](int t) {
        std::uint64_t s = trial_seed(spec.seed, t);
        FactorGraph fg = random_complete_model(7, s, PotentialStyle::uniform_small);
        std::vector<Row> rows;
        auto run_mode = [&](const std::string& label, PursuitMode mode, bool constrain) {
            PursuitConfig pc;
            pc.mode = mode;
            pc.constrain_nonsingular = constrain;
            pc.max_triangles = max_tri;
            pc.gbp = spec.gbp;
            pc.seed = s;
            double t0 = now_ms();
            auto trace = region_pursuit(fg, pc);
            auto push = [&](int step, const PursuitStep& st) {
                rows.push_back({exp_name, std::to_string(t), std::to_string(s), label,
                                std::to_string(step), triangle_label(st.triangle, fg),
                                st.accepted ? "1" : "0", fmt(st.score), fmt(st.max_marginal_error),
                                fmt(st.free_energy), std::to_string(st.iterations),
                                st.converged ? "1" : "0", fmt(now_ms() - t0)});
            };
            push(0, trace.baseline);
            for (std::size_t i = 0; i < trace.steps.size(); ++i)
                push(static_cast<int>(i) + 1, trace.steps[i]);
        };
        run_mode("best", PursuitMode::best, false);
        run_mode("worst", PursuitMode::worst, false);
        run_mode("nonsingular", PursuitMode::best, true);
        return rows;
    };
    out.rows = run_trials(spec.trials, spec.jobs, one_trial);
    append_aggregates(out.rows, out.header, {3, 4});
    return out;
}

ExperimentResult convergence_fig7(const ExperimentSpec& spec) {
    ExperimentResult out;
    out.header = {"experiment", "trial", "seed", "method", "n_vars", "accepted",
                  "total_iterations", "convergence_rate", "final_max_error", "wall_time_ms"};
    const std::string exp_name = to_string(spec.name);
    const int max_tri = spec.max_triangles >= 0 ? spec.max_triangles : 30;

    auto one_trial = [&](int t) {
        std::uint64_t s = trial_seed(spec.seed, t);
        Rng rng(s);
        int n = 11 + static_cast<int>(rng.below(5));
        FactorGraph fg = random_complete_model(n, rng.next(), PotentialStyle::gaussian);
        std::vector<Row> rows;
        auto summarize = [&](const std::string& label, const PursuitTrace& trace, double t0) {
            long total_iters = trace.baseline.iterations;
            int conv = trace.baseline.converged ? 1 : 0;
            int steps = 1;
            for (const auto& st : trace.steps) {
                if (!st.accepted) continue;
                total_iters += st.iterations;
                conv += st.converged ? 1 : 0;
                ++steps;
            }
            double final_err = trace.steps.empty() ? trace.baseline.max_marginal_error
                                                   : trace.steps.back().max_marginal_error;
            rows.push_back({exp_name, std::to_string(t), std::to_string(s), label,
                            std::to_string(n), std::to_string(trace.accepted.size()),
                            std::to_string(total_iters),
                            fmt(static_cast<double>(conv) / static_cast<double>(steps)),
                            fmt(final_err), fmt(now_ms() - t0)});
        };
        PursuitConfig pc;
        pc.mode = PursuitMode::best;
        pc.constrain_nonsingular = false;
        pc.max_triangles = max_tri;
        pc.gbp = spec.gbp;
        pc.seed = s;
        double t0 = now_ms();
        auto control = region_pursuit(fg, pc);
        summarize("pursuit", control, t0);

        PursuitConfig alt = pc;
        alt.mode = PursuitMode::fixed_order;
        alt.fixed_sequence = control.accepted; // same order, singular picks skipped
        alt.constrain_nonsingular = true;
        t0 = now_ms();
        auto constrained = region_pursuit(fg, alt);
        summarize("nonsingular", constrained, t0);
        return rows;
    };
    out.rows = run_trials(spec.trials, spec.jobs, one_trial);
    append_aggregates(out.rows, out.header, {3});
    return out;
}

ExperimentResult reduction_equivalence(const ExperimentSpec& spec) {
    ExperimentResult out;
    out.header = {"experiment", "trial", "seed", "check", "value", "pass", "wall_time_ms"};
    const std::string exp_name = to_string(spec.name);

    auto one_trial = [&](int t) {
        std::uint64_t s = trial_seed(spec.seed, t);
        std::vector<Row> rows;
        auto push = [&](const std::string& check, double value, bool pass, double t0) {
            rows.push_back({exp_name, std::to_string(t), std::to_string(s), check, fmt(value),
                            pass ? "1" : "0", fmt(now_ms() - t0)});
        };

        {
            double t0 = now_ms();
            FactorGraph fg = grid_model(2, 4, s);
            auto reduced = reduce_to_ordinary(ep_graph(fg, ep_factorized_spec(fg)));
            bool iso = isomorphic(reduced.graph, bethe(fg));
            push("epfact_iso_bethe", iso ? 1 : 0, iso, t0);
            auto a = run_gbp(reduced.graph, fg, spec.gbp);
            auto b = run_gbp(bethe(fg), fg, spec.gbp);
            double diff = 0.0;
            auto ma = node_marginals(reduced.graph, a.beliefs);
            auto mb = node_marginals(bethe(fg), b.beliefs);
            for (const auto& [v, m] : ma) diff = std::max(diff, (m - mb.at(v)).abs().maxCoeff());
            push("epfact_vs_bethe_marginals", diff, a.converged && b.converged && diff < 1e-9, t0);
        }
        {
            double t0 = now_ms();
            FactorGraph fg = grid_model(4, 4, s);
            auto reduced = reduce_to_ordinary(ep_graph(fg, ep_grid_tree_spec(fg, 4, 4)));
            bool iso = isomorphic(reduced.graph, grid_boxes(fg, 4, 4, 2, 2));
            push("eptree_iso_squares", iso ? 1 : 0, iso, t0);
        }
        {
            double t0 = now_ms();
            FactorGraph fg = random_bipartite_model(2, 3, s);
            auto ep = ep_graph(fg, ep_k23_spec(fg));
            RegionGraph fig5c = reduce_k23_to_loops(ep);
            RegionGraph fig5d = reduce_to_ordinary(fig5c).graph; // split into smaller loops
            auto rc = run_gbp(fig5c, fg, spec.gbp);
            auto rd = run_gbp(fig5d, fg, spec.gbp);
            auto mc = node_marginals(fig5c, rc.beliefs);
            auto md = node_marginals(fig5d, rd.beliefs);
            double diff = 0.0;
            for (const auto& [v, m] : mc) diff = std::max(diff, (m - md.at(v)).abs().maxCoeff());
            push("fig5c_vs_fig5d_marginals", diff, rc.converged && rd.converged && diff < 1e-6, t0);
            bool iso = isomorphic(fig5d, star_rg(fg, 1));
            push("fig5d_iso_star", iso ? 1 : 0, iso, t0);
        }
        return rows;
    };
    out.rows = run_trials(spec.trials, spec.jobs, one_trial);
    append_aggregates(out.rows, out.header, {3});
    return out;
}

} // namespace

ExperimentName experiment_by_name(const std::string& name) {
    if (name == "table1_complete") return ExperimentName::table1_complete;
    if (name == "table1_bipartite") return ExperimentName::table1_bipartite;
    if (name == "grid_boxes_sweep") return ExperimentName::grid_boxes_sweep;
    if (name == "pursuit_fig6") return ExperimentName::pursuit_fig6;
    if (name == "convergence_fig7") return ExperimentName::convergence_fig7;
    if (name == "reduction_equivalence") return ExperimentName::reduction_equivalence;
    fail("InvalidConfig", "unknown experiment " + name);
}

std::string to_string(ExperimentName name) {
    switch (name) {
        case ExperimentName::table1_complete: return "table1_complete";
        case ExperimentName::table1_bipartite: return "table1_bipartite";
        case ExperimentName::grid_boxes_sweep: return "grid_boxes_sweep";
        case ExperimentName::pursuit_fig6: return "pursuit_fig6";
        case ExperimentName::convergence_fig7: return "convergence_fig7";
        case ExperimentName::reduction_equivalence: return "reduction_equivalence";
    }
    return "?";
}

std::string ExperimentResult::csv() const {
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
        os << "\n";
    }
    return os.str();
}

double ExperimentResult::aggregate(const std::string& key_column, const std::string& key,
                                   const std::string& column) const {
    std::size_t kc = header.size(), vc = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == key_column) kc = i;
        if (header[i] == column) vc = i;
    }
    if (kc == header.size() || vc == header.size()) fail("InvalidConfig", "unknown CSV column");
    for (const auto& r : rows)
        if (r[1] == "mean" && r[kc] == key) return std::stod(r[vc]);
    fail("InvalidConfig", "no aggregate row for " + key);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.trials < 1) fail("InvalidConfig", "trials must be >= 1");
    ExperimentResult res;
    switch (spec.name) {
        case ExperimentName::table1_complete: res = table1(spec, false); break;
        case ExperimentName::table1_bipartite: res = table1(spec, true); break;
        case ExperimentName::grid_boxes_sweep: res = grid_sweep(spec); break;
        case ExperimentName::pursuit_fig6: res = pursuit_fig6(spec); break;
        case ExperimentName::convergence_fig7: res = convergence_fig7(spec); break;
        case ExperimentName::reduction_equivalence: res = reduction_equivalence(spec); break;
    }
    if (!spec.output_path.empty()) write_text_file(spec.output_path, res.csv());
    return res;
}

RegionGraph reduce_k23_to_loops(const RegionGraph& ep) {
    ReduceOptions opts;
    opts.max_outer_separator = 1; // keep the loops whole
    return reduce_to_ordinary(ep, opts).graph;
}

RegionGraph star_rg_plus_extra(const FactorGraph& fg, int width,
                               const std::vector<VarId>& node_order) {
    auto clusters = star_clusters(fg, width, node_order);
    std::vector<VarId> order = node_order;
    if (order.empty())
        for (VarId v = 0; v < fg.n_vars(); ++v) order.push_back(v);
    std::vector<VarId> extra;
    for (int p = 1; p <= width + 2 && p < static_cast<int>(order.size()); ++p)
        extra.push_back(order[static_cast<std::size_t>(p)]);
    std::sort(extra.begin(), extra.end());
    clusters.push_back(extra);
    return cluster_variation(fg, clusters);
}

} // namespace srg
