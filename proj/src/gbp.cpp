#include "srg/gbp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "srg/rng.hpp"

namespace srg {

GbpEngine::GbpEngine(const RegionGraph& rg, const FactorGraph& fg) : rg_(&rg), fg_(&fg) {
    auto report = validate(rg);
    if (!report.overall) {
        std::string why = report.problems.empty() ? "validity checks failed" : report.problems.front();
        fail("InvalidRegionGraph", why);
    }
    for (RegionId id : rg.inner_regions())
        if (!is_complete(rg.region(id)))
            fail("NonCompleteInnerRegion",
                 "inner region " + std::to_string(id) + " is not complete");

    // factor assignment must cover the model exactly once
    std::vector<int> uses(static_cast<std::size_t>(fg.n_factors()), 0);
    for (const auto& [id, r] : rg.regions())
        for (FactorId f : r.factors) {
            if (f < 0 || f >= fg.n_factors())
                fail("InvalidRegionGraph", "region references an unknown factor");
            if (rg.factor_scope(f) != fg.factor(f).scope)
                fail("InvalidRegionGraph", "factor scope mismatch between graph and model");
            ++uses[static_cast<std::size_t>(f)];
        }
    for (FactorId f = 0; f < fg.n_factors(); ++f)
        if (uses[static_cast<std::size_t>(f)] != 1)
            fail("InvalidRegionGraph",
                 "factor " + fg.factor(f).name + " not assigned to exactly one region");
    auto covered = rg.all_vars();
    for (VarId v = 0; v < fg.n_vars(); ++v)
        if (!std::binary_search(covered.begin(), covered.end(), v))
            fail("UncoveredVariable",
                 "variable " + fg.variables()[static_cast<std::size_t>(v)].name +
                     " appears in no region");

    rids_ = rg.region_ids();
    for (std::size_t i = 0; i < rids_.size(); ++i) ridx_[rids_[i]] = i;

    log_f_.reserve(rids_.size());
    for (RegionId id : rids_) {
        const Region& r = rg.region(id);
        Table t(r.vars, fg.cards_of(r.vars), 0.0);
        for (FactorId f : r.factors) add_projected(t, log_floored(fg.factor(f).table));
        log_f_.push_back(std::move(t));
    }

    // edges in sequential-topological order: by parent depth, then ids
    auto depth = rg.depths();
    std::vector<std::pair<RegionId, RegionId>> es(rg.edges().begin(), rg.edges().end());
    std::stable_sort(es.begin(), es.end(), [&](const auto& a, const auto& b) {
        if (depth.at(a.first) != depth.at(b.first)) return depth.at(a.first) < depth.at(b.first);
        return a < b;
    });
    for (auto [p, c] : es) edges_.push_back({p, c, ridx_.at(p), ridx_.at(c)});

    // M(R): messages (P -> C) with C inside {R} + descendants(R) and P outside
    msgs_of_.assign(rids_.size(), {});
    for (std::size_t i = 0; i < rids_.size(); ++i) {
        auto dset = rg.descendants(rids_[i]);
        dset.insert(rids_[i]);
        for (std::size_t m = 0; m < edges_.size(); ++m)
            if (dset.count(edges_[m].child) && !dset.count(edges_[m].parent))
                msgs_of_[i].push_back(m);
    }

    // cached index projections for the hot loops
    msg_proj_.assign(rids_.size(), {});
    for (std::size_t i = 0; i < rids_.size(); ++i) {
        const Region& r = rg.region(rids_[i]);
        for (std::size_t m : msgs_of_[i]) {
            const Region& c = rg.region(edges_[m].child);
            msg_proj_[i].push_back(
                projection_indices(r.vars, fg.cards_of(r.vars), c.vars));
        }
    }
    marg_proj_.reserve(edges_.size());
    for (const auto& e : edges_) {
        const Region& p = rg.region(e.parent);
        const Region& c = rg.region(e.child);
        marg_proj_.push_back(projection_indices(p.vars, fg.cards_of(p.vars), c.vars));
    }
}

Table GbpEngine::log_belief(std::size_t region_idx, const std::vector<Table>& logm) const {
    Table b = log_f_[region_idx];
    for (std::size_t k = 0; k < msgs_of_[region_idx].size(); ++k) {
        const Table& t = logm[msgs_of_[region_idx][k]];
        const auto& proj = msg_proj_[region_idx][k];
        for (Index i = 0; i < b.size(); ++i) b[i] += t[proj[static_cast<std::size_t>(i)]];
    }
    return b;
}

BeliefSet GbpEngine::beliefs_from(const std::vector<Table>& logm) const {
    BeliefSet bs;
    for (std::size_t i = 0; i < rids_.size(); ++i)
        bs.q[rids_[i]] = exp_normalized(log_belief(i, logm));
    return bs;
}

GbpResult GbpEngine::run(const GbpConfig& cfg) const {
    MessageSet init;
    for (const auto& e : edges_) {
        const Region& c = rg_->region(e.child);
        init.edges.push_back({e.parent, e.child});
        init.log_messages.emplace_back(c.vars, fg_->cards_of(c.vars), 0.0);
    }
    if (cfg.init_seed) {
        Rng rng(*cfg.init_seed);
        for (auto& t : init.log_messages)
            for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    }
    return run(cfg, init);
}

GbpResult GbpEngine::run(const GbpConfig& cfg, const MessageSet& initial) const {
    if (!(cfg.tolerance > 0)) fail("InvalidConfig", "tolerance must be positive");
    if (cfg.damping < 0 || cfg.damping >= 1) fail("InvalidConfig", "damping must lie in [0,1)");
    if (initial.log_messages.size() != edges_.size())
        fail("InvalidConfig", "initial message set does not match the graph");

    std::vector<Table> init = initial.log_messages;
    for (auto& t : init) {
        double z = logsumexp(t);
        t.values() -= z;
    }
    std::vector<Table> logm = init;

    double damping = cfg.damping;
    std::deque<double> history;
    Rng sched_rng(cfg.seed);
    std::vector<std::size_t> order(edges_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    GbpResult res;
    res.iterations = 0;
    double delta = 0.0, residual = 0.0;
    std::vector<Table> work = logm;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        if (cfg.schedule == Schedule::random_permutation)
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[sched_rng.below(i)]);
        // One full undamped sweep (latest values used within the sweep), then a
        // geometric blend of old and new log-messages. Damping inside the sweep
        // feeds partially-updated messages back into the echo-cancelling terms
        // and destabilizes graphs with large counting numbers.
        work = logm;
        delta = 0.0;
        for (std::size_t oi = 0; oi < order.size(); ++oi) {
            const std::size_t ei = order[oi];
            const EdgeInfo& e = edges_[ei];
            Table bp = log_belief(e.parent_idx, work);
            const auto& mproj = marg_proj_[ei];
            Table& cur = work[ei];
            // log-marginal of the parent belief onto the child scope
            Table num = cur; // reuse shape
            num.values().setConstant(-std::numeric_limits<double>::infinity());
            for (Index i = 0; i < bp.size(); ++i) {
                Index j = mproj[static_cast<std::size_t>(i)];
                if (bp[i] > num[j]) num[j] = bp[i];
            }
            Table acc = cur;
            acc.values().setZero();
            for (Index i = 0; i < bp.size(); ++i) {
                Index j = mproj[static_cast<std::size_t>(i)];
                acc[j] += std::exp(bp[i] - num[j]);
            }
            for (Index j = 0; j < num.size(); ++j) num[j] += std::log(acc[j]);
            // divide out the child belief without this message
            const auto& cm = msgs_of_[e.child_idx];
            for (std::size_t k = 0; k < cm.size(); ++k) {
                if (cm[k] == ei) continue;
                const Table& t = work[cm[k]];
                const auto& proj = msg_proj_[e.child_idx][k];
                for (Index j = 0; j < num.size(); ++j)
                    num[j] -= t[proj[static_cast<std::size_t>(j)]];
            }
            num.values() -= logsumexp(num);
            delta = std::max(delta, (num.values() - logm[ei].values()).abs().maxCoeff());
            cur = std::move(num);
        }
        for (std::size_t m = 0; m < logm.size(); ++m) {
            logm[m].values() =
                damping * logm[m].values() + (1.0 - damping) * work[m].values();
            logm[m].values() = logm[m].values().max(kLogFloor);
        }
        res.iterations = iter;

        if (delta < cfg.tolerance) {
            auto bs = beliefs_from(logm);
            residual = constraint_residual(*rg_, bs);
            if (residual <= 10.0 * cfg.tolerance) {
                res.converged = true;
                break;
            }
        }

        // Oscillation / runaway watch: no net progress over a 20-sweep window or
        // an exploding residual. Escalate damping and restart from the initial
        // messages; continuing a saturated trajectory cannot recover.
        history.push_back(delta);
        bool stuck = false;
        if (history.size() > 20) {
            double old = history.front();
            history.pop_front();
            stuck = delta >= old;
        }
        if (cfg.auto_damping && (stuck || delta > 1e3) && damping < 0.98 - 1e-12) {
            if (damping < 0.7) damping = 0.7;
            else if (damping < 0.9) damping = 0.9;
            else if (damping < 0.95) damping = 0.95;
            else damping = 0.98;
            history.clear();
            logm = init;
        }
    }

    res.final_delta = delta;
    res.damping_used = damping;
    res.beliefs = beliefs_from(logm);
    res.max_constraint_residual = constraint_residual(*rg_, res.beliefs);
    res.free_energy = free_energy(*rg_, *fg_, res.beliefs);
    res.messages.edges.clear();
    for (const auto& e : edges_) res.messages.edges.push_back({e.parent, e.child});
    res.messages.log_messages = std::move(logm);
    if (res.converged && res.max_constraint_residual > 10.0 * cfg.tolerance) res.converged = false;
    return res;
}

GbpResult run_gbp(const RegionGraph& rg, const FactorGraph& fg, const GbpConfig& cfg) {
    return GbpEngine(rg, fg).run(cfg);
}

double free_energy(const RegionGraph& rg, const FactorGraph& fg, const BeliefSet& beliefs) {
    auto cn = counting_numbers(rg);
    double F = 0.0;
    for (const auto& [id, r] : rg.regions()) {
        auto it = beliefs.q.find(id);
        if (it == beliefs.q.end()) fail("ShapeMismatch", "missing belief for region " + std::to_string(id));
        const Table& q = it->second;
        if (q.scope() != r.vars) fail("ShapeMismatch", "belief scope does not match region");
        double entropy_term = plogp_sum(q);
        double energy_term = 0.0;
        if (!r.factors.empty()) {
            Table lf(r.vars, fg.cards_of(r.vars), 0.0);
            for (FactorId f : r.factors) add_projected(lf, log_floored(fg.factor(f).table));
            energy_term = (q.values() * lf.values()).sum();
        }
        F += cn.at(id) * (entropy_term - energy_term);
    }
    return F;
}

double constraint_residual(const RegionGraph& rg, const BeliefSet& beliefs) {
    double worst = 0.0;
    for (const auto& [p, c] : rg.edges()) {
        const Table& qp = beliefs.q.at(p);
        const Table& qc = beliefs.q.at(c);
        for (const auto& k : rg.region(c).cliques) {
            Table mp = marginalize(qp, k.vars);
            Table mc = marginalize(qc, k.vars);
            worst = std::max(worst, (mp.values() - mc.values()).abs().maxCoeff());
        }
    }
    return worst;
}

std::map<VarId, Eigen::ArrayXd> node_marginals(const RegionGraph& rg, const BeliefSet& beliefs) {
    auto depth = rg.depths();
    std::map<VarId, RegionId> chosen;
    for (const auto& [id, r] : rg.regions())
        for (VarId v : r.vars) {
            auto it = chosen.find(v);
            if (it == chosen.end() || depth.at(id) > depth.at(it->second) ||
                (depth.at(id) == depth.at(it->second) && id < it->second))
                chosen[v] = id;
        }
    std::map<VarId, Eigen::ArrayXd> out;
    for (const auto& [v, id] : chosen) {
        Table m = marginalize(beliefs.q.at(id), {v});
        out[v] = m.values();
    }
    return out;
}

double max_marginal_error(const std::map<VarId, Eigen::ArrayXd>& marginals,
                          const ExactResult& exact) {
    double worst = 0.0;
    for (const auto& [v, m] : marginals) {
        if (static_cast<std::size_t>(v) >= exact.marginals.size())
            fail("UncoveredVariable", "marginal for a variable outside the model");
        worst = std::max(worst, (m - exact.marginals[static_cast<std::size_t>(v)]).abs().maxCoeff());
    }
    return worst;
}

} // namespace srg
