#include "opde/expr.hpp"

#include <algorithm>

#include "opde/errors.hpp"

namespace opde {

bool is_complete(const Traversal& t, const Library& lib) {
    if (t.empty()) return false;
    int balance = 1;  // open slots
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (balance <= 0) return false;  // tokens after completion
        balance += lib.arity(t[i]) - 1;
    }
    return balance == 0;
}

namespace {

ExprTree parse_node(const Traversal& t, const Library& lib, std::size_t& pos) {
    if (pos >= t.size())
        throw MalformedTraversalError("traversal incomplete: ran out of tokens");
    ExprTree node;
    node.token = t[pos++];
    const int arity = lib.arity(node.token);
    node.children.reserve(static_cast<std::size_t>(arity));
    for (int i = 0; i < arity; ++i) node.children.push_back(parse_node(t, lib, pos));
    return node;
}

}  // namespace

ExprTree rebuild_tree(const Traversal& t, const Library& lib) {
    if (t.empty()) throw MalformedTraversalError("empty traversal");
    std::size_t pos = 0;
    ExprTree tree = parse_node(t, lib, pos);
    if (pos != t.size())
        throw MalformedTraversalError("traversal over-complete: " +
                                      std::to_string(t.size() - pos) + " unused tokens");
    return tree;
}

namespace {

void preorder_into(const ExprTree& tree, Traversal& out) {
    out.push_back(tree.token);
    for (const ExprTree& c : tree.children) preorder_into(c, out);
}

void split_into(const ExprTree& node, int sign, const Library& lib, TermSet& out) {
    const OpCode c = lib.code(node.token);
    if (c == OpCode::Add) {
        split_into(node.children[0], sign, lib, out);
        split_into(node.children[1], sign, lib, out);
    } else if (c == OpCode::Sub) {
        split_into(node.children[0], sign, lib, out);
        split_into(node.children[1], -sign, lib, out);
    } else {
        out.push_back(SignedTerm{sign, node});
    }
}

}  // namespace

Traversal preorder(const ExprTree& tree) {
    Traversal out;
    preorder_into(tree, out);
    return out;
}

TermSet split_tree(const ExprTree& root, const Library& lib) {
    TermSet out;
    split_into(root, 1, lib, out);
    return out;
}

int depth(const ExprTree& tree) {
    int d = 0;
    for (const ExprTree& c : tree.children) d = std::max(d, depth(c));
    return d + 1;
}

namespace {

bool parenthesised(const std::string& s) {
    return !s.empty() && s.front() == '(' && s.back() == ')';
}

std::string diffable(const ExprTree& node, const Library& lib, const std::string& sig) {
    if (lib.is_operand(node.token) || parenthesised(sig)) return sig;
    return "(" + sig + ")";
}

}  // namespace

std::string signature(const ExprTree& tree, const Library& lib) {
    const OpCode c = lib.code(tree.token);
    auto child = [&](std::size_t i) { return signature(tree.children[i], lib); };
    switch (c) {
        case OpCode::Add: return "(" + child(0) + "+" + child(1) + ")";
        case OpCode::Sub: return "(" + child(0) + "-" + child(1) + ")";
        case OpCode::Mul: return "(" + child(0) + "*" + child(1) + ")";
        case OpCode::Div: return "(" + child(0) + "/" + child(1) + ")";
        case OpCode::Square: return diffable(tree.children[0], lib, child(0)) + "^2";
        case OpCode::Cube: return diffable(tree.children[0], lib, child(0)) + "^3";
        case OpCode::Sin: return "sin(" + child(0) + ")";
        case OpCode::Cos: return "cos(" + child(0) + ")";
        case OpCode::Log: return "log(" + child(0) + ")";
        case OpCode::Laplacian: return "lap(" + child(0) + ")";
        case OpCode::Diff1:
        case OpCode::Diff2:
        case OpCode::Diff3: {
            const int order = diff_order(c);
            const std::string var = lib.symbol(tree.children[1].token);
            std::string suffix = "_";
            for (int i = 0; i < order; ++i) suffix += var;
            return diffable(tree.children[0], lib, child(0)) + suffix;
        }
        default: return lib.symbol(tree.token);
    }
}

std::vector<std::string> traversal_symbols(const Traversal& t, const Library& lib) {
    std::vector<std::string> out;
    out.reserve(t.size());
    for (TokenId id : t) out.push_back(lib.symbol(id));
    return out;
}

Traversal parse_symbols(const std::vector<std::string>& symbols, const Library& lib) {
    Traversal t;
    t.reserve(symbols.size());
    for (const std::string& s : symbols) t.push_back(lib.find(s));
    return t;
}

// ---------------------------------------------------------------------------
// GenState

GenState::GenState(const Library& lib)
    : lib_(&lib), token_counts_(lib.size(), 0) {}

void GenState::push(TokenId token) {
    if (complete()) throw StateError("push on complete traversal");
    const int arity = lib_->arity(token);

    const bool slot_top_level = next_is_top_level();
    if (!stack_.empty()) {
        Frame& top = stack_.back();
        ++top.filled;
        if (top.filled == 1) top.first_child = token;
    }

    prefix_.push_back(token);
    ++token_counts_[static_cast<std::size_t>(token)];
    const bool pm = lib_->is_plus_minus(token);
    if (pm) {
        ++pm_count_;
        if (slot_top_level) ++top_pm_count_;
    }

    if (arity > 0) {
        Frame f;
        f.token = token;
        f.arity = arity;
        f.top_level_pm = pm && slot_top_level;
        f.is_diff = lib_->is_any_diff(token);
        stack_.push_back(f);
    }
    // Pop finished frames (a leaf can close several nested operators).
    while (!stack_.empty() && stack_.back().filled == stack_.back().arity)
        stack_.pop_back();
}

int GenState::dangling() const {
    if (prefix_.empty()) return 1;
    int d = 0;
    for (const Frame& f : stack_) d += f.arity - f.filled;
    return d;
}

std::optional<TokenId> GenState::next_parent() const {
    if (complete()) throw StateError("next_parent on complete traversal");
    if (stack_.empty()) return std::nullopt;
    return stack_.back().token;
}

std::optional<TokenId> GenState::next_sibling() const {
    if (complete()) throw StateError("next_sibling on complete traversal");
    if (stack_.empty() || stack_.back().filled == 0) return std::nullopt;
    return stack_.back().first_child;
}

int GenState::count_of(TokenId id) const {
    return token_counts_.at(static_cast<std::size_t>(id));
}

int GenState::next_term_depth() const {
    int d = 1;
    for (const Frame& f : stack_)
        if (!f.top_level_pm) ++d;
    return d;
}

bool GenState::next_is_top_level() const {
    return std::all_of(stack_.begin(), stack_.end(),
                       [](const Frame& f) { return f.top_level_pm; });
}

bool GenState::under_diff() const {
    for (std::size_t i = 0; i < stack_.size(); ++i) {
        const Frame& f = stack_[i];
        if (!f.is_diff) continue;
        if (f.arity == 1) return true;  // lap: the single child is differentiated
        const bool is_top = i + 1 == stack_.size();
        // Binary d: the path (or next slot) descends child 0 only.
        const int descending_child = is_top ? f.filled : f.filled - 1;
        if (descending_child == 0) return true;
    }
    return false;
}

std::optional<int> GenState::diff_child_slot() const {
    if (stack_.empty()) return std::nullopt;
    const Frame& top = stack_.back();
    if (!top.is_diff || top.arity != 2) return std::nullopt;
    return top.filled;
}

}  // namespace opde
