#include "opde/policy.hpp"

#include <algorithm>
#include <cmath>

#include "opde/errors.hpp"

namespace opde {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void fill_xavier(Eigen::MatrixXd& m, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-s, s);
}

void fill_xavier(Eigen::VectorXd& v, Rng& rng) {
    const double s = std::sqrt(6.0 / static_cast<double>(v.size() + 1));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.uniform(-s, s);
}

}  // namespace

std::size_t PolicyParams::parameter_count() const {
    return static_cast<std::size_t>(Wx.size() + Wh.size() + b.size() + Wq.size() + Wk.size() +
                                    wv.size() + Wo.size() + Wy.size() + by.size());
}

Eigen::VectorXd PolicyParams::flatten() const {
    Eigen::VectorXd theta(static_cast<Eigen::Index>(parameter_count()));
    Eigen::Index at = 0;
    auto put = [&](const auto& m) {
        std::copy(m.data(), m.data() + m.size(), theta.data() + at);
        at += m.size();
    };
    put(Wx); put(Wh); put(b); put(Wq); put(Wk); put(wv); put(Wo); put(Wy); put(by);
    return theta;
}

void PolicyParams::unflatten(const Eigen::VectorXd& theta) {
    Eigen::Index at = 0;
    auto take = [&](auto& m) {
        std::copy(theta.data() + at, theta.data() + at + m.size(), m.data());
        at += m.size();
    };
    take(Wx); take(Wh); take(b); take(Wq); take(Wk); take(wv); take(Wo); take(Wy); take(by);
    if (at != theta.size()) throw ConfigError("unflatten: size mismatch");
}

PolicyParams PolicyParams::init(const Library& lib, int hidden, int window, bool use_attention,
                                std::uint64_t seed) {
    PolicyParams p;
    p.hidden = hidden;
    p.window = window;
    p.use_attention = use_attention;
    p.lib_size = static_cast<int>(lib.size());
    const int H = hidden, L = p.lib_size, in = p.input_dim();
    p.Wx.resize(4 * H, in);
    p.Wh.resize(4 * H, H);
    p.b = Eigen::VectorXd::Zero(4 * H);
    p.Wq.resize(H, 2 * H);
    p.Wk.resize(H, H);
    p.wv.resize(H);
    p.Wo.resize(H, 2 * H);
    p.Wy.resize(L, H);
    p.by = Eigen::VectorXd::Zero(L);

    Rng rng(seed ^ 0xabcdef1234567890ULL);
    fill_xavier(p.Wx, rng);
    fill_xavier(p.Wh, rng);
    fill_xavier(p.Wq, rng);
    fill_xavier(p.Wk, rng);
    fill_xavier(p.wv, rng);
    fill_xavier(p.Wo, rng);
    fill_xavier(p.Wy, rng);
    p.b.segment(H, H).array() += 1.0;  // forget-gate bias
    // Mild operand bias keeps the untrained agent's trees short.
    for (const Token& t : lib.tokens())
        if (t.kind == TokenKind::Operand) p.by(t.id) = 0.8;
    return p;
}

PolicyParams zeros_like(const PolicyParams& p) {
    PolicyParams z = p;
    z.Wx.setZero(); z.Wh.setZero(); z.b.setZero();
    z.Wq.setZero(); z.Wk.setZero(); z.wv.setZero();
    z.Wo.setZero(); z.Wy.setZero(); z.by.setZero();
    return z;
}

void accumulate(PolicyParams& acc, const PolicyParams& g, double scale) {
    acc.Wx += scale * g.Wx; acc.Wh += scale * g.Wh; acc.b += scale * g.b;
    acc.Wq += scale * g.Wq; acc.Wk += scale * g.Wk; acc.wv += scale * g.wv;
    acc.Wo += scale * g.Wo; acc.Wy += scale * g.Wy; acc.by += scale * g.by;
}

bool all_finite(const PolicyParams& p) {
    return p.Wx.allFinite() && p.Wh.allFinite() && p.b.allFinite() && p.Wq.allFinite() &&
           p.Wk.allFinite() && p.wv.allFinite() && p.Wo.allFinite() && p.Wy.allFinite() &&
           p.by.allFinite();
}

namespace {

struct StepTrace {
    int parent_col = 0, sibling_col = 0;
    Eigen::VectorXd h_prev, c_prev;
    Eigen::VectorXd gi, gf, go, gg;  // gate activations
    Eigen::VectorXd c, tanh_c, h;
    int win_begin = 0, win_size = 0;
    Eigen::MatrixXd e;  // H x win_size
    Eigen::VectorXd s;  // win_size
    Eigen::VectorXd htilde, O;
    Eigen::VectorXd probs;
    int choice = -1;
    double entropy = 0.0;
};

// Shared forward step. `trace` may be null on the sampling path.
Eigen::VectorXd step_core(const PolicyParams& p, AgentState& st, int parent, int sibling,
                          StepTrace* trace) {
    const int H = p.hidden;
    const int L = p.lib_size;
    const int parent_col = parent < 0 ? L : parent;
    const int sibling_col = (L + 1) + (sibling < 0 ? L : sibling);

    Eigen::VectorXd z = p.Wx.col(parent_col) + p.Wx.col(sibling_col) + p.Wh * st.h + p.b;
    Eigen::VectorXd gi(H), gf(H), go(H), gg(H);
    for (int k = 0; k < H; ++k) {
        gi(k) = sigmoid(z(k));
        gf(k) = sigmoid(z(H + k));
        go(k) = sigmoid(z(2 * H + k));
        gg(k) = std::tanh(z(3 * H + k));
    }
    Eigen::VectorXd c = gf.cwiseProduct(st.c) + gi.cwiseProduct(gg);
    Eigen::VectorXd tanh_c = c.array().tanh().matrix();
    Eigen::VectorXd h = go.cwiseProduct(tanh_c);

    const int tape_len = static_cast<int>(st.tape.size());
    const int win = p.use_attention ? std::min(tape_len, p.window) : 0;
    const int win_begin = tape_len - win;

    Eigen::VectorXd htilde = Eigen::VectorXd::Zero(H);
    Eigen::MatrixXd e(H, win);
    Eigen::VectorXd s(win);
    if (win > 0) {
        Eigen::VectorXd q(2 * H);
        q << h, c;
        const Eigen::VectorXd Wq_q = p.Wq * q;
        Eigen::VectorXd a(win);
        for (int j = 0; j < win; ++j) {
            e.col(j) = (Wq_q + p.Wk * st.tape[static_cast<std::size_t>(win_begin + j)])
                           .array().tanh().matrix();
            a(j) = p.wv.dot(e.col(j));
        }
        const double amax = a.maxCoeff();
        s = (a.array() - amax).exp().matrix();
        s /= s.sum();
        for (int j = 0; j < win; ++j)
            htilde += s(j) * st.tape[static_cast<std::size_t>(win_begin + j)];
    }

    Eigen::VectorXd cat(2 * H);
    cat << h, htilde;
    Eigen::VectorXd O = p.Wo * cat;
    Eigen::VectorXd logits = p.Wy * O + p.by;

    if (trace) {
        trace->parent_col = parent_col;
        trace->sibling_col = sibling_col;
        trace->h_prev = st.h;
        trace->c_prev = st.c;
        trace->gi = gi; trace->gf = gf; trace->go = go; trace->gg = gg;
        trace->c = c; trace->tanh_c = tanh_c; trace->h = h;
        trace->win_begin = win_begin;
        trace->win_size = win;
        trace->e = e;
        trace->s = s;
        trace->htilde = htilde;
        trace->O = O;
    }

    st.h = h;
    st.c = c;
    st.tape.push_back(O);
    return logits;
}

}  // namespace

Eigen::VectorXd policy_step(const PolicyParams& p, AgentState& state, int parent, int sibling) {
    return step_core(p, state, parent, sibling, nullptr);
}

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<bool>& allowed) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (allowed[static_cast<std::size_t>(i)]) mx = std::max(mx, logits(i));
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(logits.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!allowed[static_cast<std::size_t>(i)]) continue;
        const double w = std::exp(logits(i) - mx);
        probs(i) = w;
        total += w;
    }
    probs /= total;
    return probs;
}

double distribution_entropy(const Eigen::VectorXd& probs) {
    double h = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i)
        if (probs(i) > 0.0) h -= probs(i) * std::log(probs(i));
    return h;
}

std::vector<bool> constraint_mask(const GenState& gs, const ConstraintSet& cs,
                                  const Library& lib) {
    const int L = static_cast<int>(lib.size());
    std::vector<bool> allowed(static_cast<std::size_t>(L), true);

    const int len = gs.length();
    const int dang = gs.dangling();
    const auto slot = gs.diff_child_slot();
    const bool var_slot = slot.has_value() && *slot == 1;
    const bool diff_expr_slot = slot.has_value() && *slot == 0;
    const auto parent = gs.next_parent();
    const bool lap_child =
        parent.has_value() && lib.code(*parent) == OpCode::Laplacian;
    const bool under_diff = gs.under_diff();
    const bool top_level = gs.next_is_top_level();
    const int term_depth = gs.next_term_depth();

    for (TokenId tok = 0; tok < L; ++tok) {
        const int arity = lib.arity(tok);
        bool ok = true;
        // Arity budget: completing every open slot must fit in max_length.
        if (len + 1 + (dang - 1 + arity) > cs.max_length) ok = false;
        if (var_slot) {
            if (!lib.is_space_var(tok)) ok = false;
        } else {
            if ((diff_expr_slot || lap_child) && lib.is_space_var(tok)) ok = false;
            if (lib.is_plus_minus(tok)) {
                if (gs.plus_minus_count() >= cs.max_plus_minus) ok = false;
                if (cs.no_plus_minus_under_diff && under_diff) ok = false;
                if (top_level && gs.top_level_plus_minus_count() >= cs.max_terms - 1) ok = false;
            }
            if (arity > 0 && term_depth >= cs.max_term_depth) ok = false;
        }
        allowed[static_cast<std::size_t>(tok)] = ok;
    }

    if (cs.symmetry_xy && lib.contains("y")) {
        const TokenId x = lib.find("x"), y = lib.find("y");
        const int cx = gs.count_of(x), cy = gs.count_of(y);
        std::vector<bool> sym = allowed;
        bool any = false;
        for (TokenId tok = 0; tok < L; ++tok) {
            if (!sym[static_cast<std::size_t>(tok)]) continue;
            const int arity = lib.arity(tok);
            const int nx = cx + (tok == x ? 1 : 0);
            const int ny = cy + (tok == y ? 1 : 0);
            const int dang2 = dang - 1 + arity;
            const int budget = cs.max_length - (len + 1);
            // Each future binary operator buys at most one extra leaf slot,
            // so at most (budget + dang2) / 2 leaves can still be placed.
            if (2 * std::abs(nx - ny) > budget + dang2)
                sym[static_cast<std::size_t>(tok)] = false;
            else
                any = true;
        }
        if (any) allowed = sym;  // otherwise relax; the regulation rejects later
    }

    if (std::none_of(allowed.begin(), allowed.end(), [](bool b) { return b; }))
        throw StateError("constraint mask is empty; generation state corrupt");
    return allowed;
}

std::vector<Rollout> sample_batch(const PolicyParams& p, int n, const ConstraintSet& cs,
                                  const Library& lib, Rng& rng) {
    std::vector<Rollout> batch;
    batch.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rollout r;
        GenState gs(lib);
        AgentState st = AgentState::initial(p);
        while (!gs.complete()) {
            const int parent = gs.next_parent().value_or(-1);
            const int sibling = gs.next_sibling().value_or(-1);
            const Eigen::VectorXd logits = step_core(p, st, parent, sibling, nullptr);
            const std::vector<bool> allowed = constraint_mask(gs, cs, lib);
            const Eigen::VectorXd probs = masked_softmax(logits, allowed);
            const std::size_t choice =
                rng.categorical(std::span<const double>(probs.data(),
                                                        static_cast<std::size_t>(probs.size())));
            r.step_logprobs.push_back(std::log(probs(static_cast<Eigen::Index>(choice))));
            r.step_entropies.push_back(distribution_entropy(probs));
            gs.push(static_cast<TokenId>(choice));
        }
        r.traversal = gs.prefix();
        for (double lp : r.step_logprobs) r.logprob += lp;
        for (double he : r.step_entropies) r.entropy += he;
        batch.push_back(std::move(r));
    }
    return batch;
}

std::pair<double, double> rollout_logprob(const PolicyParams& p, const Traversal& t,
                                          const ConstraintSet& cs, const Library& lib) {
    GenState gs(lib);
    AgentState st = AgentState::initial(p);
    double logprob = 0.0, entropy = 0.0;
    for (TokenId tok : t) {
        const int parent = gs.next_parent().value_or(-1);
        const int sibling = gs.next_sibling().value_or(-1);
        const Eigen::VectorXd logits = step_core(p, st, parent, sibling, nullptr);
        const Eigen::VectorXd probs = masked_softmax(logits, constraint_mask(gs, cs, lib));
        logprob += std::log(probs(tok));
        entropy += distribution_entropy(probs);
        gs.push(tok);
    }
    return {logprob, entropy};
}

PolicyParams policy_backward(const PolicyParams& p, std::span<const Rollout> rollouts,
                             std::span<const double> logprob_weights,
                             std::span<const double> entropy_weights, const ConstraintSet& cs,
                             const Library& lib) {
    const int H = p.hidden;
    PolicyParams grad = zeros_like(p);

    for (std::size_t ri = 0; ri < rollouts.size(); ++ri) {
        const double w = logprob_weights[ri];
        const double ew = entropy_weights[ri];
        if (w == 0.0 && ew == 0.0) continue;
        const Traversal& tau = rollouts[ri].traversal;
        const int len = static_cast<int>(tau.size());

        // Teacher-forced replay with stored activations.
        std::vector<StepTrace> traces(static_cast<std::size_t>(len));
        GenState gs(lib);
        AgentState st = AgentState::initial(p);
        for (int t = 0; t < len; ++t) {
            StepTrace& tr = traces[static_cast<std::size_t>(t)];
            const int parent = gs.next_parent().value_or(-1);
            const int sibling = gs.next_sibling().value_or(-1);
            const Eigen::VectorXd logits = step_core(p, st, parent, sibling, &tr);
            tr.probs = masked_softmax(logits, constraint_mask(gs, cs, lib));
            tr.choice = tau[static_cast<std::size_t>(t)];
            tr.entropy = distribution_entropy(tr.probs);
            gs.push(tr.choice);
        }

        std::vector<Eigen::VectorXd> dO(static_cast<std::size_t>(len),
                                        Eigen::VectorXd::Zero(H));
        Eigen::VectorXd dh_carry = Eigen::VectorXd::Zero(H);
        Eigen::VectorXd dc_carry = Eigen::VectorXd::Zero(H);

        for (int t = len - 1; t >= 0; --t) {
            const StepTrace& tr = traces[static_cast<std::size_t>(t)];
            const Eigen::VectorXd& probs = tr.probs;

            Eigen::VectorXd dlogits = Eigen::VectorXd::Zero(p.lib_size);
            if (w != 0.0) {
                dlogits -= w * probs;
                dlogits(tr.choice) += w;
            }
            if (ew != 0.0) {
                for (Eigen::Index k = 0; k < probs.size(); ++k)
                    if (probs(k) > 0.0)
                        dlogits(k) -= ew * probs(k) * (std::log(probs(k)) + tr.entropy);
            }

            grad.by += dlogits;
            grad.Wy += dlogits * tr.O.transpose();
            dO[static_cast<std::size_t>(t)] += p.Wy.transpose() * dlogits;

            const Eigen::VectorXd& dOt = dO[static_cast<std::size_t>(t)];
            Eigen::VectorXd cat(2 * H);
            cat << tr.h, tr.htilde;
            grad.Wo += dOt * cat.transpose();
            Eigen::VectorXd dcat = p.Wo.transpose() * dOt;

            Eigen::VectorXd dh = dcat.head(H) + dh_carry;
            Eigen::VectorXd dc = dc_carry;
            const Eigen::VectorXd dhtilde = dcat.tail(H);

            if (tr.win_size > 0) {
                const int W = tr.win_size;
                Eigen::VectorXd ds(W);
                for (int j = 0; j < W; ++j) {
                    const Eigen::VectorXd& Oj =
                        traces[static_cast<std::size_t>(tr.win_begin + j)].O;
                    ds(j) = Oj.dot(dhtilde);
                    dO[static_cast<std::size_t>(tr.win_begin + j)] += tr.s(j) * dhtilde;
                }
                const double sdots = tr.s.dot(ds);
                Eigen::VectorXd da(W);
                for (int j = 0; j < W; ++j) da(j) = tr.s(j) * (ds(j) - sdots);

                Eigen::VectorXd q(2 * H);
                q << tr.h, tr.c;
                Eigen::VectorXd dq = Eigen::VectorXd::Zero(2 * H);
                for (int j = 0; j < W; ++j) {
                    const Eigen::VectorXd& Oj =
                        traces[static_cast<std::size_t>(tr.win_begin + j)].O;
                    const Eigen::VectorXd ej = tr.e.col(j);
                    grad.wv += da(j) * ej;
                    const Eigen::VectorXd du =
                        da(j) * p.wv.cwiseProduct((1.0 - ej.array().square()).matrix());
                    grad.Wq += du * q.transpose();
                    dq += p.Wq.transpose() * du;
                    grad.Wk += du * Oj.transpose();
                    dO[static_cast<std::size_t>(tr.win_begin + j)] += p.Wk.transpose() * du;
                }
                dh += dq.head(H);
                dc += dq.tail(H);
            }

            // LSTM cell backward.
            Eigen::VectorXd dgo = dh.cwiseProduct(tr.tanh_c);
            dc += dh.cwiseProduct(tr.go)
                      .cwiseProduct((1.0 - tr.tanh_c.array().square()).matrix());
            Eigen::VectorXd dgi = dc.cwiseProduct(tr.gg);
            Eigen::VectorXd dgg = dc.cwiseProduct(tr.gi);
            Eigen::VectorXd dgf = dc.cwiseProduct(tr.c_prev);
            dc_carry = dc.cwiseProduct(tr.gf);

            Eigen::VectorXd dz(4 * H);
            dz.segment(0, H) = dgi.cwiseProduct(tr.gi)
                                   .cwiseProduct((1.0 - tr.gi.array()).matrix());
            dz.segment(H, H) = dgf.cwiseProduct(tr.gf)
                                   .cwiseProduct((1.0 - tr.gf.array()).matrix());
            dz.segment(2 * H, H) = dgo.cwiseProduct(tr.go)
                                       .cwiseProduct((1.0 - tr.go.array()).matrix());
            dz.segment(3 * H, H) =
                dgg.cwiseProduct((1.0 - tr.gg.array().square()).matrix());

            grad.b += dz;
            grad.Wh += dz * tr.h_prev.transpose();
            dh_carry = p.Wh.transpose() * dz;
            grad.Wx.col(tr.parent_col) += dz;
            grad.Wx.col(tr.sibling_col) += dz;
        }
    }
    return grad;
}

}  // namespace opde
