#include "opde/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_map>

#include "opde/errors.hpp"

namespace opde {

namespace {

bool hof_order(const EvaluatedPde& a, const EvaluatedPde& b) {
    if (a.reward != b.reward) return a.reward > b.reward;
    return a.traversal < b.traversal;  // deterministic tie-break
}

}  // namespace

void HallOfFame::update(const std::vector<EvaluatedPde>& batch) {
    for (const EvaluatedPde& e : batch) {
        if (!e.valid()) continue;
        const auto dup = std::find_if(entries_.begin(), entries_.end(),
                                      [&](const EvaluatedPde& q) { return q.traversal == e.traversal; });
        if (dup != entries_.end()) continue;
        entries_.push_back(e);
    }
    std::sort(entries_.begin(), entries_.end(), hof_order);
    if (static_cast<int>(entries_.size()) > capacity_)
        entries_.resize(static_cast<std::size_t>(capacity_));
}

const EvaluatedPde& HallOfFame::best() const {
    if (entries_.empty()) throw StateError("hall of fame is empty");
    return entries_.front();
}

double reward_quantile(std::vector<double> rewards, double eps) {
    if (rewards.empty()) throw StateError("reward_quantile on empty batch");
    if (eps <= 0.0 || eps > 1.0) throw ConfigError("epsilon must be in (0, 1]");
    std::sort(rewards.begin(), rewards.end(), std::greater<double>());
    const std::size_t k = static_cast<std::size_t>(
        std::ceil(eps * static_cast<double>(rewards.size())));
    return rewards[std::min(k, rewards.size()) - 1];
}

Search::Search(const Library& lib, const Dataset& data, const SampleSet& pts,
               const Hyperparams& hp, const ConstraintSet& cs, const PolicyOptions& opts,
               std::uint64_t seed)
    : lib_(lib),
      data_(data),
      pts_(pts),
      hp_(hp),
      cs_(cs),
      params_(PolicyParams::init(lib, opts.hidden, hp.T, opts.use_attention, seed)),
      optimizer_(opts.optimizer, hp.alpha),
      hof_(hp.K),
      rng_(seed) {}

IterationLog Search::train_iteration() {
    const auto t0 = std::chrono::steady_clock::now();
    IterationLog log;
    log.iteration = ++iteration_;

    std::vector<Rollout> rollouts = sample_batch(params_, hp_.N, cs_, lib_, rng_);

    // Deduplicate identical traversals before evaluation; every rollout still
    // contributes its own gradient sample.
    std::unordered_map<std::string, std::size_t> unique;
    std::vector<const Traversal*> to_eval;
    std::vector<std::size_t> eval_index(rollouts.size());
    for (std::size_t i = 0; i < rollouts.size(); ++i) {
        std::string key;
        key.reserve(rollouts[i].traversal.size() * 3);
        for (TokenId id : rollouts[i].traversal) {
            key += std::to_string(id);
            key += ',';
        }
        auto [it, inserted] = unique.emplace(key, to_eval.size());
        if (inserted) to_eval.push_back(&rollouts[i].traversal);
        eval_index[i] = it->second;
    }

    std::vector<EvaluatedPde> evaluated(to_eval.size());
    {
        const unsigned n_threads =
            std::max(1u, std::min(std::thread::hardware_concurrency(),
                                  static_cast<unsigned>(to_eval.size())));
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= to_eval.size()) break;
                evaluated[i] = evaluate_pde(*to_eval[i], data_, pts_, hp_, lib_, &cache_);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (std::thread& t : pool) t.join();
    }

    std::vector<const EvaluatedPde*> per_rollout(rollouts.size());
    std::vector<EvaluatedPde> valid;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < rollouts.size(); ++i)
        per_rollout[i] = &evaluated[eval_index[i]];
    for (const EvaluatedPde& e : evaluated) {
        if (e.valid()) {
            valid.push_back(e);
        } else {
            ++log.violation_counts[violation_name(e.violation)];
        }
    }
    for (std::size_t i = 0; i < rollouts.size(); ++i)
        if (!per_rollout[i]->valid()) ++log.n_invalid;
    for (std::size_t i = 0; i < rollouts.size(); ++i)
        if (per_rollout[i]->valid()) rewards.push_back(per_rollout[i]->reward);

    if (!rewards.empty()) {
        const double q = reward_quantile(rewards, hp_.epsilon);
        log.q_eps = q;

        const double pg_scale = hp_.lambda_pg / (hp_.epsilon * static_cast<double>(hp_.N));
        const double ent_scale = hp_.lambda_H / (hp_.epsilon * static_cast<double>(hp_.N));
        std::vector<double> w(rollouts.size(), 0.0), ew(rollouts.size(), 0.0);
        double selected_sum = 0.0;
        for (std::size_t i = 0; i < rollouts.size(); ++i) {
            const EvaluatedPde& e = *per_rollout[i];
            if (!e.valid() || e.reward < q) continue;
            w[i] = pg_scale * (e.reward - q);
            ew[i] = ent_scale;
            selected_sum += e.reward;
            ++log.n_selected;
        }
        log.mean_top_eps = log.n_selected > 0 ? selected_sum / log.n_selected : 0.0;

        PolicyParams grad = policy_backward(params_, rollouts, w, ew, cs_, lib_);
        if (!all_finite(grad))
            throw TrainingError("non-finite policy gradient at iteration " +
                                std::to_string(iteration_));
        Eigen::VectorXd theta = params_.flatten();
        optimizer_.ascend(theta, grad.flatten());
        if (!theta.allFinite())
            throw TrainingError("non-finite parameter update at iteration " +
                                std::to_string(iteration_));
        params_.unflatten(theta);

        hof_.update(valid);
    }

    if (!hof_.empty()) {
        const EvaluatedPde& best = hof_.best();
        log.best_reward = best.reward;
        log.best_expr = render_equation(best);
        log.n_terms = best.n_terms;
        log.rmse = best.rmse;
    }
    // Best-of-iteration terms, for the term-evolution report.
    const EvaluatedPde* iter_best = nullptr;
    for (const EvaluatedPde& e : valid)
        if (!iter_best || e.reward > iter_best->reward) iter_best = &e;
    if (iter_best) log.iter_best_terms = iter_best->terms;

    log.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return log;
}

SearchResult Search::run(const std::function<void(const IterationLog&)>& on_iteration) {
    SearchResult res;
    for (int it = 0; it < hp_.max_iterations; ++it) {
        IterationLog log = train_iteration();
        if (on_iteration) on_iteration(log);
        res.logs.push_back(std::move(log));
        if (!hof_.empty() && hof_.best().reward > hp_.R_star) {
            res.converged = true;
            break;
        }
    }
    if (!hof_.empty()) res.best = hof_.best();
    res.hall_of_fame = hof_.entries();
    return res;
}

}  // namespace opde
