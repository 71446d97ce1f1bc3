#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "opde/symbols.hpp"

namespace opde {

// Pre-order token sequence. Complete iff sum(arity-1) == -1 with every
// proper prefix partial sum >= 0.
using Traversal = std::vector<TokenId>;

struct ExprTree {
    TokenId token = -1;
    std::vector<ExprTree> children;
};

struct SignedTerm {
    int sign = 1;  // +1 or -1
    ExprTree root;
};

using TermSet = std::vector<SignedTerm>;

bool is_complete(const Traversal& t, const Library& lib);

// Unique tree whose pre-order traversal equals t. Throws
// MalformedTraversalError on incomplete or over-complete input.
ExprTree rebuild_tree(const Traversal& t, const Library& lib);

Traversal preorder(const ExprTree& tree);

// Recursive split on +/- reachable from the root through +/- nodes; a minus
// flips the sign of its right subtree. A tree with no top-level +/- is a
// single term.
TermSet split_tree(const ExprTree& root, const Library& lib);

int depth(const ExprTree& tree);  // single leaf has depth 1

// Deterministic infix rendering, purely syntactic: (u*u) and u^2 differ.
// Derivatives of leaf/parenthesised children render as u_x, (u*u)_xx, ...
std::string signature(const ExprTree& tree, const Library& lib);

std::vector<std::string> traversal_symbols(const Traversal& t, const Library& lib);
Traversal parse_symbols(const std::vector<std::string>& symbols, const Library& lib);

// Incremental pre-order generation state: tracks the slot to be filled next,
// its parent/sibling, nesting counts, and everything the constraint masks
// need. push() costs O(depth) worst case, O(1) amortised.
class GenState {
public:
    explicit GenState(const Library& lib);

    void push(TokenId token);

    bool complete() const { return !prefix_.empty() && stack_.empty(); }
    const Traversal& prefix() const { return prefix_; }
    int length() const { return static_cast<int>(prefix_.size()); }

    // Unfilled child slots; 0 exactly at completion, >= 1 while incomplete
    // and nonempty. The empty prefix has one slot (the root).
    int dangling() const;

    // Parent operator of the next slot and the root token of its completed
    // left sibling (second children of binary operators only). Throws
    // StateError when the traversal is already complete.
    std::optional<TokenId> next_parent() const;
    std::optional<TokenId> next_sibling() const;

    int plus_minus_count() const { return pm_count_; }
    int top_level_plus_minus_count() const { return top_pm_count_; }
    int count_of(TokenId id) const;

    // Depth the next token would occupy in the whole tree (root slot = 1).
    int next_depth() const { return static_cast<int>(stack_.size()) + 1; }
    // Same, measured inside the current function term: top-level +/- spine
    // nodes do not count toward term depth.
    int next_term_depth() const;
    // True when every ancestor of the next slot is a top-level +/-.
    bool next_is_top_level() const;
    // True when the next slot lies inside the differentiated child of some
    // d/d2/d3/lap ancestor (the variable slot of d does not count).
    bool under_diff() const;
    // When the next slot is a child of d/d2/d3: which child (0 or 1).
    std::optional<int> diff_child_slot() const;

private:
    struct Frame {
        TokenId token;
        int arity;
        int filled = 0;
        TokenId first_child = -1;
        bool top_level_pm = false;  // this frame is a +/- on the top-level spine
        bool is_diff = false;       // d/d2/d3/lap
    };

    const Library* lib_;
    Traversal prefix_;
    std::vector<Frame> stack_;
    std::vector<int> token_counts_;
    int pm_count_ = 0;
    int top_pm_count_ = 0;
};

}  // namespace opde
