#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace opde {

using TokenId = int;

enum class TokenKind { Operator, Operand };

// Operator semantics used by the tree evaluator and the constraint engine.
enum class OpCode {
    Add, Sub, Mul, Div,
    Square, Cube,
    Diff1, Diff2, Diff3,  // binary: (expression, space variable)
    Sin, Cos, Log,
    Laplacian,            // unary, 2D only
    OperandU, OperandX, OperandY, OperandT, OperandConst,
};

struct Token {
    TokenId id = -1;
    std::string symbol;
    TokenKind kind = TokenKind::Operand;
    int arity = 0;
    OpCode code = OpCode::OperandConst;
};

struct LibraryConfig {
    int dims = 1;                   // 1 or 2 space dimensions
    bool include_laplacian = false; // valid only when dims == 2
    bool include_trig_log = true;   // sin, cos, log
    bool include_t = true;          // time operand
};

// Ordered token alphabet. Immutable after construction.
class Library {
public:
    explicit Library(std::vector<Token> tokens);

    const std::vector<Token>& tokens() const { return tokens_; }
    std::size_t size() const { return tokens_.size(); }
    const Token& token(TokenId id) const;
    int arity(TokenId id) const { return token(id).arity; }
    OpCode code(TokenId id) const { return token(id).code; }
    const std::string& symbol(TokenId id) const { return token(id).symbol; }

    // Lookup by display symbol; throws LookupError when absent.
    TokenId find(const std::string& symbol) const;
    bool contains(const std::string& symbol) const;

    bool is_space_var(TokenId id) const;
    bool is_state_var(TokenId id) const;
    bool is_diff_op(TokenId id) const;       // ∂, ∂², ∂³ (not Δ)
    bool is_any_diff(TokenId id) const;      // includes Δ
    bool is_plus_minus(TokenId id) const;
    bool is_operand(TokenId id) const { return token(id).kind == TokenKind::Operand; }

    const std::vector<TokenId>& space_vars() const { return space_vars_; }
    const std::vector<TokenId>& state_vars() const { return state_vars_; }
    const std::vector<TokenId>& diff_ops() const { return diff_ops_; }

private:
    std::vector<Token> tokens_;
    std::vector<TokenId> space_vars_;
    std::vector<TokenId> state_vars_;
    std::vector<TokenId> diff_ops_;
};

// Assembles the token set for a configuration. Default 1D: 12 operators
// {+,-,*,/,^2,^3,d,d2,d3,sin,cos,log} and 4 operands {u,x,t,1}.
Library build_library(const LibraryConfig& config);

int diff_order(OpCode code);  // 1/2/3 for Diff1..Diff3, 2 for Laplacian, 0 otherwise

}  // namespace opde
