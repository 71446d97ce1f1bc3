#include "opde/symbols.hpp"

#include <algorithm>

#include "opde/errors.hpp"

namespace opde {

Library::Library(std::vector<Token> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        Token& t = tokens_[i];
        t.id = static_cast<TokenId>(i);
        const bool operand = t.kind == TokenKind::Operand;
        if (operand != (t.arity == 0))
            throw ConfigError("token '" + t.symbol + "': arity 0 iff operand");
        switch (t.code) {
            case OpCode::OperandX:
            case OpCode::OperandY:
                space_vars_.push_back(t.id);
                break;
            case OpCode::OperandU:
                state_vars_.push_back(t.id);
                break;
            case OpCode::Diff1:
            case OpCode::Diff2:
            case OpCode::Diff3:
            case OpCode::Laplacian:
                diff_ops_.push_back(t.id);
                break;
            default:
                break;
        }
    }
}

const Token& Library::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
        throw LookupError("unknown token id " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
}

TokenId Library::find(const std::string& symbol) const {
    for (const Token& t : tokens_)
        if (t.symbol == symbol) return t.id;
    throw LookupError("unknown token symbol '" + symbol + "'");
}

bool Library::contains(const std::string& symbol) const {
    return std::any_of(tokens_.begin(), tokens_.end(),
                       [&](const Token& t) { return t.symbol == symbol; });
}

bool Library::is_space_var(TokenId id) const {
    const OpCode c = code(id);
    return c == OpCode::OperandX || c == OpCode::OperandY;
}

bool Library::is_state_var(TokenId id) const { return code(id) == OpCode::OperandU; }

bool Library::is_diff_op(TokenId id) const {
    const OpCode c = code(id);
    return c == OpCode::Diff1 || c == OpCode::Diff2 || c == OpCode::Diff3;
}

bool Library::is_any_diff(TokenId id) const {
    return is_diff_op(id) || code(id) == OpCode::Laplacian;
}

bool Library::is_plus_minus(TokenId id) const {
    const OpCode c = code(id);
    return c == OpCode::Add || c == OpCode::Sub;
}

Library build_library(const LibraryConfig& config) {
    if (config.dims != 1 && config.dims != 2)
        throw ConfigError("dims must be 1 or 2");
    if (config.include_laplacian && config.dims != 2)
        throw ConfigError("Laplace operator requires dims=2");

    std::vector<Token> toks;
    auto op = [&](const char* sym, int arity, OpCode code) {
        toks.push_back(Token{-1, sym, TokenKind::Operator, arity, code});
    };
    auto operand = [&](const char* sym, OpCode code) {
        toks.push_back(Token{-1, sym, TokenKind::Operand, 0, code});
    };

    op("+", 2, OpCode::Add);
    op("-", 2, OpCode::Sub);
    op("*", 2, OpCode::Mul);
    op("/", 2, OpCode::Div);
    op("^2", 1, OpCode::Square);
    op("^3", 1, OpCode::Cube);
    op("d", 2, OpCode::Diff1);
    op("d2", 2, OpCode::Diff2);
    op("d3", 2, OpCode::Diff3);
    if (config.include_trig_log) {
        op("sin", 1, OpCode::Sin);
        op("cos", 1, OpCode::Cos);
        op("log", 1, OpCode::Log);
    }
    if (config.include_laplacian) op("lap", 1, OpCode::Laplacian);

    operand("u", OpCode::OperandU);
    operand("x", OpCode::OperandX);
    if (config.dims == 2) operand("y", OpCode::OperandY);
    if (config.include_t) operand("t", OpCode::OperandT);
    operand("1", OpCode::OperandConst);

    return Library(std::move(toks));
}

int diff_order(OpCode code) {
    switch (code) {
        case OpCode::Diff1: return 1;
        case OpCode::Diff2: return 2;
        case OpCode::Laplacian: return 2;
        case OpCode::Diff3: return 3;
        default: return 0;
    }
}

}  // namespace opde
