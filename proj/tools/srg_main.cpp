#include <CLI11.hpp>

#include <iostream>
#include <json.hpp>
#include <sstream>

#include "srg/constructions.hpp"
#include "srg/experiments.hpp"
#include "srg/gbp.hpp"
#include "srg/io.hpp"
#include "srg/pursuit.hpp"
#include "srg/reductions.hpp"

namespace {

using namespace srg;
using nlohmann::json;

struct ModelSource {
    std::string path;
    std::string gen; // complete:N | bipartite:LxR | grid:RxC
    std::string style = "uniform_small";
    std::uint64_t seed = 0;
    std::string save_path;

    void add_options(CLI::App* cmd) {
        cmd->add_option("--model", path, "model file (srg-model format)");
        cmd->add_option("--gen", gen,
                        "generate a model instead: complete:N | bipartite:LxR | grid:RxC");
        cmd->add_option("--style", style, "potential style: uniform_small | gaussian | minka_qi");
        cmd->add_option("--seed", seed, "random seed");
        cmd->add_option("--save-model", save_path, "write the generated model to this file");
    }

    FactorGraph load() const {
        if (!path.empty()) return read_model_file(path);
        if (gen.empty()) fail("InvalidConfig", "provide --model or --gen");
        PotentialStyle st = PotentialStyle::uniform_small;
        if (style == "gaussian") st = PotentialStyle::gaussian;
        else if (style == "minka_qi") st = PotentialStyle::minka_qi;
        else if (style != "uniform_small") fail("InvalidConfig", "unknown style " + style);
        auto colon = gen.find(':');
        if (colon == std::string::npos) fail("InvalidConfig", "malformed --gen spec");
        std::string kind = gen.substr(0, colon), dims = gen.substr(colon + 1);
        FactorGraph fg = [&] {
            if (kind == "complete") return random_complete_model(std::stoi(dims), seed, st);
            auto x = dims.find('x');
            if (x == std::string::npos) fail("InvalidConfig", "malformed --gen dimensions");
            int a = std::stoi(dims.substr(0, x)), b = std::stoi(dims.substr(x + 1));
            if (kind == "bipartite") return random_bipartite_model(a, b, seed, st);
            if (kind == "grid") return grid_model(a, b, seed, st);
            fail("InvalidConfig", "unknown generator " + kind);
        }();
        if (!save_path.empty()) write_model_file(fg, save_path);
        return fg;
    }
};

GbpConfig& gbp_options(CLI::App* cmd, GbpConfig base = {}) {
    static std::map<CLI::App*, std::shared_ptr<GbpConfig>> store;
    auto cfg = std::make_shared<GbpConfig>(base);
    store[cmd] = cfg;
    cmd->add_option("--damping", cfg->damping, "message damping in [0,1)");
    cmd->add_option("--max-iters", cfg->max_iters, "iteration cap");
    cmd->add_option("--tol", cfg->tolerance, "convergence tolerance on log-messages");
    cmd->add_option_function<std::string>(
        "--schedule",
        [cfg](const std::string& s) {
            if (s == "sequential") cfg->schedule = Schedule::sequential_topological;
            else if (s == "random") cfg->schedule = Schedule::random_permutation;
            else throw CLI::ValidationError("--schedule", "use sequential or random");
        },
        "update schedule: sequential | random");
    cmd->add_option("--gbp-seed", cfg->seed, "seed for the random schedule");
    return *cfg;
}

json marginals_json(const RegionGraph& rg, const FactorGraph& fg, const BeliefSet& beliefs) {
    json out = json::object();
    for (const auto& [v, m] : node_marginals(rg, beliefs)) {
        std::vector<double> vec(m.data(), m.data() + m.size());
        out[fg.variables()[static_cast<std::size_t>(v)].name] = vec;
    }
    return out;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"structured region graphs: construction, reduction and GBP inference"};
    app.require_subcommand(1);

    // ---- build ----
    auto* build = app.add_subcommand("build", "construct a region graph for a model");
    ModelSource build_src;
    build_src.add_options(build);
    std::string kind = "bethe", out_path, order_csv, loops_arg, ep_kind = "factorized";
    int width = 1, box_rows = 2, box_cols = 2, grid_rows = 0, grid_cols = 0;
    build->add_option("--kind", kind, "bethe | squares | star | loops | epgraph | faces");
    build->add_option("--out", out_path, "output region-graph file")->required();
    build->add_option("--width", width, "star width");
    build->add_option("--order", order_csv, "comma-separated node order for star");
    build->add_option("--loops", loops_arg, "loops as 'x1,x2,x3;x2,x3,x4'");
    build->add_option("--ep", ep_kind, "epgraph flavor: factorized | gridtree | k23");
    build->add_option("--box-rows", box_rows, "box rows (squares)");
    build->add_option("--box-cols", box_cols, "box cols (squares)");
    build->add_option("--grid-rows", grid_rows, "grid rows (squares/faces/gridtree)");
    build->add_option("--grid-cols", grid_cols, "grid cols (squares/faces/gridtree)");
    build->callback([&] {
        FactorGraph fg = build_src.load();
        auto parse_order = [&]() {
            std::vector<VarId> order;
            if (order_csv.empty()) return order;
            std::stringstream ss(order_csv);
            std::string item;
            while (std::getline(ss, item, ',')) {
                int v = fg.var_index(item);
                if (v < 0) fail("InvalidConfig", "unknown variable " + item + " in --order");
                order.push_back(static_cast<VarId>(v));
            }
            return order;
        };
        RegionGraph rg;
        if (kind == "bethe") rg = bethe(fg);
        else if (kind == "star") rg = star_rg(fg, width, parse_order());
        else if (kind == "squares") {
            if (grid_rows <= 0 || grid_cols <= 0)
                fail("InvalidConfig", "--grid-rows/--grid-cols required for squares");
            rg = grid_boxes(fg, grid_rows, grid_cols, box_rows, box_cols);
        } else if (kind == "faces") {
            if (grid_rows <= 0 || grid_cols <= 0)
                fail("InvalidConfig", "--grid-rows/--grid-cols required for faces");
            rg = loop_graph(fg, grid_faces(grid_rows, grid_cols));
        } else if (kind == "loops") {
            LoopSpec spec;
            std::stringstream ss(loops_arg);
            std::string loop;
            while (std::getline(ss, loop, ';')) {
                std::vector<VarId> cyc;
                std::stringstream ls(loop);
                std::string item;
                while (std::getline(ls, item, ',')) {
                    int v = fg.var_index(item);
                    if (v < 0) fail("InvalidConfig", "unknown variable " + item + " in --loops");
                    cyc.push_back(static_cast<VarId>(v));
                }
                if (!cyc.empty()) spec.loops.push_back(cyc);
            }
            rg = loop_graph(fg, spec);
        } else if (kind == "epgraph") {
            if (ep_kind == "factorized") rg = ep_graph(fg, ep_factorized_spec(fg));
            else if (ep_kind == "gridtree") {
                if (grid_rows <= 0 || grid_cols <= 0)
                    fail("InvalidConfig", "--grid-rows/--grid-cols required for gridtree");
                rg = ep_graph(fg, ep_grid_tree_spec(fg, grid_rows, grid_cols));
            } else if (ep_kind == "k23") rg = ep_graph(fg, ep_k23_spec(fg));
            else fail("InvalidConfig", "unknown --ep flavor " + ep_kind);
        } else {
            fail("InvalidConfig", "unknown --kind " + kind);
        }
        write_region_graph_file(rg, out_path);
        std::cout << "wrote " << out_path << " (" << rg.n_regions() << " regions, "
                  << rg.edges().size() << " edges, total counting number "
                  << total_counting_number(rg) << ")\n";
    });

    // ---- validate ----
    auto* val = app.add_subcommand("validate", "check region-graph validity conditions");
    std::string val_rg, val_model;
    val->add_option("--rg", val_rg, "region-graph file")->required();
    val->add_option("--model", val_model, "optional model file for name resolution");
    val->callback([&] {
        std::optional<FactorGraph> fg;
        if (!val_model.empty()) fg = read_model_file(val_model);
        RegionGraph rg = read_region_graph_file(val_rg, fg ? &*fg : nullptr);
        auto rep = validate(rg);
        if (rep.overall) {
            std::cout << "valid: connectedness, balancedness and hierarchy all hold\n";
        } else {
            std::cout << "INVALID:\n";
            for (const auto& p : rep.problems) std::cout << "  - " << p << "\n";
            throw Error("InvalidRegionGraph", "validation failed");
        }
    });

    // ---- reduce ----
    auto* red = app.add_subcommand("reduce", "reduce an SRG to an ordinary region graph");
    std::string red_rg, red_out, red_trace, red_model;
    red->add_option("--rg", red_rg, "input region-graph file")->required();
    red->add_option("--model", red_model, "optional model file for name resolution");
    red->add_option("--out", red_out, "output region-graph file")->required();
    red->add_option("--trace", red_trace, "write the reduction step trace here");
    red->callback([&] {
        std::optional<FactorGraph> fg;
        if (!red_model.empty()) fg = read_model_file(red_model);
        RegionGraph rg = read_region_graph_file(red_rg, fg ? &*fg : nullptr);
        auto res = reduce_to_ordinary(rg);
        write_region_graph_file(res.graph, red_out);
        if (!red_trace.empty()) {
            std::ostringstream os;
            for (const auto& st : res.trace)
                os << to_string(st.op) << ": " << st.detail << " (total " << st.total_before
                   << " -> " << st.total_after << ")\n";
            write_text_file(red_trace, os.str());
        }
        std::cout << "reduced to " << res.graph.n_regions() << " regions in " << res.trace.size()
                  << " steps\n";
    });

    // ---- diagnose ----
    auto* diag = app.add_subcommand("diagnose", "singularity diagnostics");
    std::string diag_rg, diag_model;
    bool diag_peel = false;
    diag->add_option("--rg", diag_rg, "region-graph file")->required();
    diag->add_option("--model", diag_model, "optional model file");
    diag->add_flag("--loop-peel", diag_peel, "also run the loop-graph peeling test");
    diag->callback([&] {
        std::optional<FactorGraph> fg;
        if (!diag_model.empty()) fg = read_model_file(diag_model);
        RegionGraph rg = read_region_graph_file(diag_rg, fg ? &*fg : nullptr);
        auto v = nonsingular_general(rg);
        std::cout << "general reduction test: " << to_string(v.verdict) << " (" << v.detail
                  << ")\n";
        if (v.residual)
            std::cout << "  residual graph: " << v.residual->n_regions() << " regions\n";
        if (diag_peel) {
            auto lp = loop_graph_singular(rg);
            std::cout << "loop peeling: " << to_string(lp.verdict);
            if (!lp.witness_loops.empty()) {
                std::cout << " witness loops:";
                for (RegionId id : lp.witness_loops) std::cout << " r" << id;
            }
            std::cout << "\n";
        }
    });

    // ---- infer ----
    auto* inf = app.add_subcommand("infer", "run GBP on a region graph");
    ModelSource inf_src;
    inf_src.add_options(inf);
    std::string inf_rg, inf_out, inf_csv;
    std::uint64_t init_seed = 0;
    bool has_init_seed = false;
    GbpConfig& inf_cfg = gbp_options(inf);
    inf->add_option("--rg", inf_rg, "region-graph file")->required();
    inf->add_option("--out", inf_out, "write the result as JSON here");
    inf->add_option("--csv", inf_csv, "write per-variable marginal rows here");
    inf->add_option("--init-seed", init_seed, "randomize initial messages with this seed")
        ->each([&](const std::string&) { has_init_seed = true; });
    inf->callback([&] {
        FactorGraph fg = inf_src.load();
        RegionGraph rg = read_region_graph_file(inf_rg, &fg);
        GbpConfig cfg = inf_cfg;
        if (has_init_seed) cfg.init_seed = init_seed;
        auto res = run_gbp(rg, fg, cfg);
        json doc;
        doc["converged"] = res.converged;
        doc["iterations"] = res.iterations;
        doc["free_energy"] = res.free_energy;
        doc["max_constraint_residual"] = res.max_constraint_residual;
        doc["damping_used"] = res.damping_used;
        doc["marginals"] = marginals_json(rg, fg, res.beliefs);
        std::string text = doc.dump(2) + "\n";
        if (!inf_out.empty()) write_text_file(inf_out, text);
        else std::cout << text;
        if (!inf_csv.empty()) {
            std::ostringstream os;
            os << "variable,state,probability\n";
            for (const auto& [v, m] : node_marginals(rg, res.beliefs))
                for (Eigen::Index i = 0; i < m.size(); ++i) {
                    char buf[40];
                    std::snprintf(buf, sizeof(buf), "%.12g", m[i]);
                    os << fg.variables()[static_cast<std::size_t>(v)].name << "," << i << ","
                       << buf << "\n";
                }
            write_text_file(inf_csv, os.str());
        }
        if (!res.converged) throw Error("DidNotConverge", "GBP did not converge");
    });

    // ---- exact ----
    auto* ex = app.add_subcommand("exact", "brute-force marginals and log partition function");
    ModelSource ex_src;
    ex_src.add_options(ex);
    std::string ex_out;
    Index state_limit = Index(1) << 24;
    ex->add_option("--state-limit", state_limit, "largest joint state space to enumerate");
    ex->add_option("--out", ex_out, "write the result as JSON here");
    ex->callback([&] {
        FactorGraph fg = ex_src.load();
        auto res = exact_inference(fg, state_limit);
        json doc;
        doc["log_partition"] = res.log_partition;
        json marg = json::object();
        for (int v = 0; v < fg.n_vars(); ++v) {
            const auto& m = res.marginals[static_cast<std::size_t>(v)];
            marg[fg.variables()[static_cast<std::size_t>(v)].name] =
                std::vector<double>(m.data(), m.data() + m.size());
        }
        doc["marginals"] = marg;
        std::string text = doc.dump(2) + "\n";
        if (!ex_out.empty()) write_text_file(ex_out, text);
        else std::cout << text;
    });

    // ---- pursue ----
    auto* pur = app.add_subcommand("pursue", "greedy triangle region pursuit");
    ModelSource pur_src;
    pur_src.add_options(pur);
    std::string pur_mode = "best", pur_out;
    bool pur_constrain = false;
    int pur_max = 35, pur_trials = 1;
    GbpConfig& pur_cfg = gbp_options(pur);
    pur->add_option("--mode", pur_mode, "best | worst");
    pur->add_flag("--constrain", pur_constrain, "reject triangles that make the graph singular");
    pur->add_option("--max-triangles", pur_max, "acceptance budget");
    pur->add_option("--trials", pur_trials, "number of seeded trials (generated models only)");
    pur->add_option("--out", pur_out, "per-step CSV output")->required();
    pur->callback([&] {
        std::ostringstream os;
        os << "trial,seed,step,triangle,accepted,score,max_marginal_error,free_energy,"
              "iterations,converged\n";
        for (int t = 0; t < pur_trials; ++t) {
            ModelSource src = pur_src;
            src.seed = pur_src.seed + static_cast<std::uint64_t>(t);
            FactorGraph fg = src.load();
            PursuitConfig pc;
            pc.mode = pur_mode == "worst" ? PursuitMode::worst : PursuitMode::best;
            pc.constrain_nonsingular = pur_constrain;
            pc.max_triangles = pur_max;
            pc.gbp = pur_cfg;
            pc.seed = src.seed;
            auto trace = region_pursuit(fg, pc);
            auto put = [&](int step, const PursuitStep& st) {
                std::string tri = "-";
                if (st.triangle[0] >= 0) {
                    tri.clear();
                    for (int i = 0; i < 3; ++i)
                        tri += (i ? "|" : "") +
                               fg.variables()[static_cast<std::size_t>(st.triangle[i])].name;
                }
                char e1[40], e2[40], e3[40];
                std::snprintf(e1, sizeof(e1), "%.12g", st.score);
                std::snprintf(e2, sizeof(e2), "%.12g", st.max_marginal_error);
                std::snprintf(e3, sizeof(e3), "%.12g", st.free_energy);
                os << t << "," << src.seed << "," << step << "," << tri << ","
                   << (st.accepted ? 1 : 0) << "," << e1 << "," << e2 << "," << e3 << ","
                   << st.iterations << "," << (st.converged ? 1 : 0) << "\n";
            };
            put(0, trace.baseline);
            for (std::size_t i = 0; i < trace.steps.size(); ++i)
                put(static_cast<int>(i) + 1, trace.steps[i]);
        }
        write_text_file(pur_out, os.str());
        std::cout << "wrote " << pur_out << "\n";
    });

    // ---- experiment ----
    auto* exp = app.add_subcommand("experiment", "run one of the built-in studies");
    std::string exp_name, exp_out;
    int exp_trials = 20, exp_jobs = 1, exp_max_tri = -1;
    std::uint64_t exp_seed = 0;
    GbpConfig& exp_cfg = gbp_options(exp);
    exp->add_option("--name", exp_name,
                    "table1_complete | table1_bipartite | grid_boxes_sweep | pursuit_fig6 | "
                    "convergence_fig7 | reduction_equivalence")
        ->required();
    exp->add_option("--trials", exp_trials, "trial count");
    exp->add_option("--seed", exp_seed, "base seed");
    exp->add_option("--out", exp_out, "CSV output path")->required();
    exp->add_option("--jobs", exp_jobs, "concurrent trials");
    exp->add_option("--max-triangles", exp_max_tri, "pursuit budget override");
    exp->callback([&] {
        ExperimentSpec spec;
        spec.name = experiment_by_name(exp_name);
        spec.trials = exp_trials;
        spec.seed = exp_seed;
        spec.output_path = exp_out;
        spec.gbp = exp_cfg;
        spec.jobs = exp_jobs;
        spec.max_triangles = exp_max_tri;
        auto res = run_experiment(spec);
        std::cout << "wrote " << exp_out << " (" << res.rows.size() << " rows)\n";
    });

    // ---- export-dot ----
    auto* dot = app.add_subcommand("export-dot", "render a region graph as DOT");
    std::string dot_rg, dot_out, dot_model;
    dot->add_option("--rg", dot_rg, "region-graph file")->required();
    dot->add_option("--model", dot_model, "optional model file");
    dot->add_option("--out", dot_out, "output .dot file")->required();
    dot->callback([&] {
        std::optional<FactorGraph> fg;
        if (!dot_model.empty()) fg = read_model_file(dot_model);
        RegionGraph rg = read_region_graph_file(dot_rg, fg ? &*fg : nullptr);
        write_text_file(dot_out, to_dot(rg));
        std::cout << "wrote " << dot_out << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2; // usage errors exit with 2
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const srg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
