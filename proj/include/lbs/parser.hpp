#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "lbs/ast.hpp"
#include "lbs/binders.hpp"

namespace lbs {

struct ParseError : std::runtime_error {
    int line, col;
    std::vector<std::string> expected;
    ParseError(int line_, int col_, const std::string& msg, std::vector<std::string> exp = {})
        : std::runtime_error(msg), line(line_), col(col_), expected(std::move(exp)) {}
};

namespace lex {

enum class Tok {
    Ident, Number,
    KwVal, KwNew, KwLet, KwAnd, KwDo, KwOr, KwRun, KwMov, KwDelay, KwThis,
    KwSphere, KwCuboid, KwSpace, KwCh, KwFl, KwFst, KwSnd, KwGlue, KwZero,
    LParen, RParen, LAngle, RAngle, Comma, Colon, Semi, Dot, Underscore, Pipe,
    At, Bang, Question, Star, Plus, Minus, Eq, End
};

struct Token {
    Tok kind;
    std::string text;
    double num = 0.0;
    int line = 1, col = 1;
};

inline const std::map<std::string, Tok>& keywords() {
    static const std::map<std::string, Tok> kw = {
        {"val", Tok::KwVal},   {"new", Tok::KwNew},     {"let", Tok::KwLet},   {"and", Tok::KwAnd},
        {"do", Tok::KwDo},     {"or", Tok::KwOr},       {"run", Tok::KwRun},   {"mov", Tok::KwMov},
        {"delay", Tok::KwDelay}, {"this", Tok::KwThis}, {"sphere", Tok::KwSphere},
        {"cuboid", Tok::KwCuboid}, {"space", Tok::KwSpace}, {"ch", Tok::KwCh}, {"chan", Tok::KwCh},
        {"fl", Tok::KwFl},     {"fst", Tok::KwFst},     {"snd", Tok::KwSnd},   {"glue", Tok::KwGlue},
    };
    return kw;
}

inline const char* tok_name(Tok t) {
    switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::KwVal: return "'val'";
    case Tok::KwNew: return "'new'";
    case Tok::KwLet: return "'let'";
    case Tok::KwAnd: return "'and'";
    case Tok::KwDo: return "'do'";
    case Tok::KwOr: return "'or'";
    case Tok::KwRun: return "'run'";
    case Tok::KwMov: return "'mov'";
    case Tok::KwDelay: return "'delay'";
    case Tok::KwThis: return "'this'";
    case Tok::KwSphere: return "'sphere'";
    case Tok::KwCuboid: return "'cuboid'";
    case Tok::KwSpace: return "'space'";
    case Tok::KwCh: return "'ch'";
    case Tok::KwFl: return "'fl'";
    case Tok::KwFst: return "'fst'";
    case Tok::KwSnd: return "'snd'";
    case Tok::KwGlue: return "'glue'";
    case Tok::KwZero: return "'0'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LAngle: return "'<'";
    case Tok::RAngle: return "'>'";
    case Tok::Comma: return "','";
    case Tok::Colon: return "':'";
    case Tok::Semi: return "';'";
    case Tok::Dot: return "'.'";
    case Tok::Underscore: return "'_'";
    case Tok::Pipe: return "'|'";
    case Tok::At: return "'@'";
    case Tok::Bang: return "'!'";
    case Tok::Question: return "'?'";
    case Tok::Star: return "'*'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Eq: return "'='";
    case Tok::End: return "end of input";
    }
    return "?";
}

inline std::vector<Token> tokenize(const std::string& src) {
    std::vector<Token> out;
    int line = 1, col = 1;
    size_t i = 0;
    auto advance = [&](size_t n) {
        for (size_t k = 0; k < n; ++k) {
            if (src[i + k] == '\n') { ++line; col = 1; }
            else ++col;
        }
        i += n;
    };
    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\r' || c == '\n') { advance(1); continue; }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            while (i < src.size() && src[i] != '\n') advance(1);
            continue;
        }
        Token t;
        t.line = line;
        t.col = col;
        if (std::isalpha(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
            while (j < src.size() && src[j] == '\'') ++j;
            t.text = src.substr(i, j - i);
            auto it = keywords().find(t.text);
            t.kind = it != keywords().end() ? it->second : Tok::Ident;
            advance(j - i);
            out.push_back(t);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t j = i;
            while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            if (j < src.size() && src[j] == '.' && j + 1 < src.size() &&
                std::isdigit(static_cast<unsigned char>(src[j + 1]))) {
                ++j;
                while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
                    ++k;
                    while (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) ++k;
                    j = k;
                }
            }
            t.text = src.substr(i, j - i);
            try {
                t.num = std::stod(t.text);
            } catch (const std::out_of_range&) {
                throw ParseError(line, col, "number literal '" + t.text + "' out of range");
            }
            t.kind = t.text == "0" ? Tok::KwZero : Tok::Number;
            advance(j - i);
            out.push_back(t);
            continue;
        }
        switch (c) {
        case '(': t.kind = Tok::LParen; break;
        case ')': t.kind = Tok::RParen; break;
        case '<': t.kind = Tok::LAngle; break;
        case '>': t.kind = Tok::RAngle; break;
        case ',': t.kind = Tok::Comma; break;
        case ':': t.kind = Tok::Colon; break;
        case ';': t.kind = Tok::Semi; break;
        case '.': t.kind = Tok::Dot; break;
        case '_': t.kind = Tok::Underscore; break;
        case '|': t.kind = Tok::Pipe; break;
        case '@': t.kind = Tok::At; break;
        case '!': t.kind = Tok::Bang; break;
        case '?': t.kind = Tok::Question; break;
        case '*': t.kind = Tok::Star; break;
        case '+': t.kind = Tok::Plus; break;
        case '-': t.kind = Tok::Minus; break;
        case '=': t.kind = Tok::Eq; break;
        default:
            throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        }
        t.text = c;
        advance(1);
        out.push_back(t);
    }
    Token end;
    end.kind = Tok::End;
    end.line = line;
    end.col = col;
    out.push_back(end);
    return out;
}

} // namespace lex

class Parser {
public:
    explicit Parser(const std::string& source, std::string filename = "<input>")
        : filename_(std::move(filename)) {
        std::string body = source;
        // `#mode` pragma on the first line selects the typing regime.
        if (body.rfind("#mode", 0) == 0) {
            size_t eol = body.find('\n');
            std::string word = body.substr(5, (eol == std::string::npos ? body.size() : eol) - 5);
            size_t a = word.find_first_not_of(" \t\r");
            size_t b = word.find_last_not_of(" \t\r");
            word = a == std::string::npos ? "" : word.substr(a, b - a + 1);
            if (word == "base") mode_ = Mode::Base;
            else if (word == "random") mode_ = Mode::RandomTranslation;
            else if (word == "scale") mode_ = Mode::RandomScale;
            else throw ParseError(1, 1, "unknown mode '" + word + "'", {"base", "random", "scale"});
            modeExplicit_ = true;
            body = eol == std::string::npos ? "" : "//" + body.substr(0, eol) + body.substr(eol);
        }
        toks_ = lex::tokenize(body);
    }

    Program parse_program() {
        Program p;
        p.filename = filename_;
        p.mode = mode_;
        p.mode_explicit = modeExplicit_;
        while (!at(lex::Tok::KwRun)) {
            if (at(lex::Tok::KwVal)) parse_vals(p);
            else if (at(lex::Tok::KwNew)) p.channels.push_back(parse_channel());
            else if (at(lex::Tok::KwLet)) parse_lets(p);
            else fail({"'val'", "'new'", "'let'", "'run'"});
        }
        p.run_span = span();
        expect(lex::Tok::KwRun);
        p.initial = parse_par_process();
        expect(lex::Tok::End);
        return p;
    }

    // Entry point used by tests to parse a standalone expression.
    ExprPtr parse_expression_only() {
        ExprPtr e = parse_expr();
        expect(lex::Tok::End);
        return e;
    }

private:
    std::vector<lex::Token> toks_;
    size_t pos_ = 0;
    Mode mode_ = Mode::RandomScale;
    bool modeExplicit_ = false;
    std::string filename_;

    const lex::Token& cur() const { return toks_[pos_]; }
    const lex::Token& peek(size_t k = 1) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
    bool at(lex::Tok k) const { return cur().kind == k; }
    Span span() const { return Span{cur().line, cur().col}; }

    [[noreturn]] void fail(std::vector<std::string> expected) const {
        std::string msg = "syntax error: found " + std::string(lex::tok_name(cur().kind));
        if (cur().kind == lex::Tok::Ident || cur().kind == lex::Tok::Number) msg += " '" + cur().text + "'";
        msg += "; expected ";
        for (size_t i = 0; i < expected.size(); ++i) {
            if (i) msg += i + 1 == expected.size() ? " or " : ", ";
            msg += expected[i];
        }
        throw ParseError(cur().line, cur().col, msg, std::move(expected));
    }

    lex::Token expect(lex::Tok k) {
        if (!at(k)) fail({lex::tok_name(k)});
        return toks_[pos_++];
    }

    bool accept(lex::Tok k) {
        if (!at(k)) return false;
        ++pos_;
        return true;
    }

    std::string ident() { return expect(lex::Tok::Ident).text; }

    // --- declarations ---------------------------------------------------

    void parse_vals(Program& p) {
        expect(lex::Tok::KwVal);
        while (true) {
            ValDecl v;
            v.span = span();
            v.name = ident();
            bool isSpace = false;
            if (accept(lex::Tok::Colon)) {
                if (accept(lex::Tok::KwSpace)) isSpace = true;
                else v.annotation = parse_type();
            }
            expect(lex::Tok::Eq);
            if (isSpace) v.space = parse_space_literal();
            else v.expr = parse_expr();
            p.vals.push_back(std::move(v));
            // comma continues the binding list: `val a = 1, b = 2`
            if (at(lex::Tok::Comma) && peek().kind == lex::Tok::Ident &&
                (peek(2).kind == lex::Tok::Eq || peek(2).kind == lex::Tok::Colon)) {
                ++pos_;
                continue;
            }
            break;
        }
    }

    ChannelDecl parse_channel() {
        ChannelDecl c;
        c.span = span();
        expect(lex::Tok::KwNew);
        c.name = ident();
        expect(lex::Tok::At);
        c.rate = parse_expr();
        expect(lex::Tok::Comma);
        c.radius = parse_expr();
        expect(lex::Tok::Colon);
        c.payload = parse_channel_type();
        return c;
    }

    void parse_lets(Program& p) {
        expect(lex::Tok::KwLet);
        p.defs.push_back(parse_def_clause());
        while (accept(lex::Tok::KwAnd)) p.defs.push_back(parse_def_clause());
    }

    EntityDef parse_def_clause() {
        EntityDef d;
        d.span = span();
        d.name = ident();
        expect(lex::Tok::LParen);
        if (!at(lex::Tok::RParen)) {
            do {
                std::string pname = ident();
                expect(lex::Tok::Colon);
                d.params.emplace_back(pname, parse_type());
            } while (accept(lex::Tok::Comma));
        }
        expect(lex::Tok::RParen);
        expect(lex::Tok::At);
        d.space = parse_space_ref();
        expect(lex::Tok::Comma);
        d.step = parse_expr();
        expect(lex::Tok::Comma);
        d.shape = parse_shape();
        if (accept(lex::Tok::Comma)) d.max_size = parse_expr();
        expect(lex::Tok::Eq);
        d.body = parse_body();
        return d;
    }

    ShapeSyn parse_shape() {
        ShapeSyn s;
        s.span = span();
        if (accept(lex::Tok::KwSphere)) {
            s.sphere = true;
            expect(lex::Tok::LParen);
            s.dims.push_back(parse_expr());
            expect(lex::Tok::RParen);
        } else if (accept(lex::Tok::KwCuboid)) {
            s.sphere = false;
            expect(lex::Tok::LParen);
            s.dims.push_back(parse_expr());
            expect(lex::Tok::Comma);
            s.dims.push_back(parse_expr());
            expect(lex::Tok::Comma);
            s.dims.push_back(parse_expr());
            expect(lex::Tok::RParen);
        } else {
            fail({"'sphere'", "'cuboid'"});
        }
        return s;
    }

    SpaceSyn parse_space_literal() {
        SpaceSyn sp;
        sp.span = span();
        sp.shape = parse_shape();
        expect(lex::Tok::At);
        expect(lex::Tok::LAngle);
        sp.anchor[0] = parse_expr();
        expect(lex::Tok::Comma);
        sp.anchor[1] = parse_expr();
        expect(lex::Tok::Comma);
        sp.anchor[2] = parse_expr();
        expect(lex::Tok::RAngle);
        return sp;
    }

    SpaceRef parse_space_ref() {
        SpaceRef r;
        r.span = span();
        if (at(lex::Tok::KwSphere) || at(lex::Tok::KwCuboid)) {
            r.inline_space = parse_space_literal();
        } else {
            r.name = ident();
        }
        return r;
    }

    // --- entity bodies ----------------------------------------------------

    RestrictedChoice parse_body() {
        RestrictedChoice rc;
        bool paren = accept(lex::Tok::LParen);
        while (at(lex::Tok::KwNew)) {
            rc.restrictions.push_back(parse_restriction());
            accept(lex::Tok::Semi) || accept(lex::Tok::Dot);
        }
        expect(lex::Tok::KwDo);
        rc.branches.push_back(parse_branch_with_desugar());
        while (accept(lex::Tok::KwOr)) rc.branches.push_back(parse_branch_with_desugar());
        if (paren) expect(lex::Tok::RParen);
        return rc;
    }

    Branch parse_branch_with_desugar() {
        pendingInputBinders_.clear();
        Branch b = parse_branch();
        if (!pendingInputBinders_.empty()) {
            b = desugar_multi_input(std::move(b), pendingInputBinders_);
            pendingInputBinders_.clear();
        }
        return b;
    }

    Restriction parse_restriction() {
        Restriction r;
        r.span = span();
        expect(lex::Tok::KwNew);
        r.name = ident();
        expect(lex::Tok::At);
        r.rate = parse_expr();
        expect(lex::Tok::Comma);
        r.radius = parse_expr();
        expect(lex::Tok::Colon);
        r.payload = parse_channel_type();
        return r;
    }

    Branch parse_branch() {
        Branch b;
        b.prefix = parse_prefix();
        if (accept(lex::Tok::Semi) || accept(lex::Tok::Dot)) b.cont = parse_par_process();
        else b.cont = mk_nil(span());
        return b;
    }

    Prefix parse_prefix() {
        Prefix p;
        p.span = span();
        if (accept(lex::Tok::KwMov)) {
            p.node = Prefix::Move{};
            return p;
        }
        if (accept(lex::Tok::KwDelay)) {
            expect(lex::Tok::At);
            p.node = Prefix::Delay{parse_expr()};
            return p;
        }
        if (accept(lex::Tok::Bang)) {
            std::string chan = ident();
            ExprPtr payload;
            if (accept(lex::Tok::LParen)) {
                if (at(lex::Tok::RParen)) {
                    payload = mk_unit(span());
                } else {
                    std::vector<ExprPtr> args{parse_expr()};
                    while (accept(lex::Tok::Comma)) args.push_back(parse_expr());
                    payload = args.size() == 1 ? args[0] : mk_tuple(std::move(args), p.span);
                }
                expect(lex::Tok::RParen);
            } else {
                payload = mk_unit(p.span);
            }
            p.node = Prefix::Output{chan, payload};
            return p;
        }
        if (accept(lex::Tok::Question)) {
            std::string chan = ident();
            std::vector<std::string> binders;
            if (accept(lex::Tok::LParen)) {
                if (!at(lex::Tok::RParen)) {
                    binders.push_back(ident());
                    while (accept(lex::Tok::Comma)) {
                        Span bs = span();
                        std::string b = ident();
                        if (std::find(binders.begin(), binders.end(), b) != binders.end())
                            throw ParseError(bs.line, bs.col, "duplicate input binder '" + b + "'");
                        binders.push_back(std::move(b));
                    }
                }
                expect(lex::Tok::RParen);
            }
            Prefix::Input in{chan, binders.size() == 1 ? binders[0] : std::string()};
            p.node = in;
            if (binders.size() >= 2) pendingInputBinders_ = binders;
            return p;
        }
        fail({"'delay'", "'!'", "'?'", "'mov'"});
    }

    // --- processes ---------------------------------------------------------

    ProcessPtr parse_par_process() {
        ProcessPtr p = parse_proc_atom();
        while (accept(lex::Tok::Pipe)) {
            Span s = span();
            p = mk_par(p, parse_proc_atom(), s);
        }
        return p;
    }

    ProcessPtr parse_proc_atom() {
        Span s = span();
        if (accept(lex::Tok::KwZero)) return mk_nil(s);
        if (accept(lex::Tok::LParen)) {
            ProcessPtr p = parse_par_process();
            expect(lex::Tok::RParen);
            return p;
        }
        if (at(lex::Tok::KwNew)) {
            // Restriction in process position extends as far right as possible.
            Restriction r = parse_restriction();
            accept(lex::Tok::Semi) || accept(lex::Tok::Dot);
            return mk_restrict(std::move(r), parse_par_process(), s);
        }
        if (at(lex::Tok::Ident)) return parse_instance();
        fail({"'0'", "'('", "'new'", "entity instance"});
    }

    ProcessPtr parse_instance() {
        Span s = span();
        std::string entity = ident();
        expect(lex::Tok::LParen);
        ExprPtr arg;
        if (at(lex::Tok::RParen)) {
            arg = mk_unit(s);
        } else {
            std::vector<ExprPtr> args{parse_expr()};
            while (accept(lex::Tok::Comma)) args.push_back(parse_expr());
            arg = args.size() == 1 ? args[0] : mk_tuple(std::move(args), s);
        }
        expect(lex::Tok::RParen);
        expect(lex::Tok::Underscore);
        ExprPtr loc = parse_postfix();
        return mk_instance(entity, arg, loc, s);
    }

    // --- expressions ---------------------------------------------------------

    ExprPtr parse_expr() {
        Span s = span();
        ExprPtr e = parse_product();
        while (at(lex::Tok::Plus) || at(lex::Tok::Minus)) {
            std::string op = cur().kind == lex::Tok::Plus ? "+" : "-";
            ++pos_;
            e = mk_op(op, mk_pair(e, parse_product(), s), s);
        }
        return e;
    }

    ExprPtr parse_product() {
        Span s = span();
        ExprPtr e = parse_postfix();
        while (accept(lex::Tok::Star)) e = mk_op("*", mk_pair(e, parse_postfix(), s), s);
        return e;
    }

    ExprPtr parse_postfix() {
        ExprPtr e = parse_primary();
        // `.k` selects a tuple component; a dot not followed by an index is a
        // prefix continuation separator and is left for the caller.
        while (at(lex::Tok::Dot) &&
               (peek().kind == lex::Tok::Number || peek().kind == lex::Tok::KwZero) &&
               peek().text.find('.') == std::string::npos) {
            Span s = span();
            ++pos_;
            int idx = static_cast<int>(expect_integer());
            e = mk_proj(e, idx, s);
        }
        return e;
    }

    long expect_integer() {
        const lex::Token& t = cur();
        if (t.kind != lex::Tok::Number && t.kind != lex::Tok::KwZero) fail({"integer"});
        ++pos_;
        return std::lround(t.num);
    }

    ExprPtr parse_primary() {
        Span s = span();
        if (at(lex::Tok::Number) || at(lex::Tok::KwZero)) {
            double v = cur().num;
            ++pos_;
            return mk_const(v, s);
        }
        if (accept(lex::Tok::Minus)) {
            const lex::Token& t = cur();
            if (t.kind != lex::Tok::Number && t.kind != lex::Tok::KwZero) fail({"number"});
            ++pos_;
            return mk_const(-t.num, s);
        }
        if (accept(lex::Tok::KwThis)) return mk_this(s);
        if (at(lex::Tok::Ident)) return mk_ident(ident(), s);
        if (accept(lex::Tok::KwFst)) {
            expect(lex::Tok::LParen);
            ExprPtr e = parse_expr();
            expect(lex::Tok::RParen);
            return mk_proj(e, 1, s);
        }
        if (accept(lex::Tok::KwSnd)) {
            expect(lex::Tok::LParen);
            ExprPtr e = parse_expr();
            expect(lex::Tok::RParen);
            return mk_proj(e, 2, s);
        }
        if (accept(lex::Tok::KwGlue)) {
            expect(lex::Tok::LParen);
            ExprPtr a = parse_expr();
            expect(lex::Tok::Comma);
            ExprPtr b = parse_expr();
            expect(lex::Tok::RParen);
            return mk_op("glue", mk_pair(a, b, s), s);
        }
        if (accept(lex::Tok::LParen)) {
            if (accept(lex::Tok::RParen)) return mk_unit(s);
            std::vector<ExprPtr> items{parse_expr()};
            while (accept(lex::Tok::Comma)) items.push_back(parse_expr());
            expect(lex::Tok::RParen);
            return items.size() == 1 ? items[0] : mk_tuple(std::move(items), s);
        }
        fail({"number", "identifier", "'this'", "'('", "'fst'", "'snd'", "'glue'"});
    }

    // --- types ------------------------------------------------------------

    TypePtr parse_type() {
        std::vector<TypePtr> items{parse_type_atom()};
        while (accept(lex::Tok::Star)) items.push_back(parse_type_atom());
        return items.size() == 1 ? items[0] : ty_prod(std::move(items));
    }

    TypePtr parse_type_atom() {
        if (accept(lex::Tok::KwFl)) return ty_fl();
        if (at(lex::Tok::KwCh)) return parse_channel_type_full();
        if (accept(lex::Tok::LParen)) {
            if (accept(lex::Tok::RParen)) return ty_top();
            TypePtr t = parse_type();
            expect(lex::Tok::RParen);
            return t;
        }
        fail({"'fl'", "'ch'", "'('"});
    }

    // The payload written inside `ch(...)`; a comma list denotes a product.
    TypePtr parse_channel_type() {
        TypePtr t = parse_channel_type_full();
        return std::get<Type::Ch>(t->node).payload;
    }

    TypePtr parse_channel_type_full() {
        expect(lex::Tok::KwCh);
        expect(lex::Tok::LParen);
        if (accept(lex::Tok::RParen)) return ty_ch(ty_top());
        std::vector<TypePtr> items{parse_type()};
        while (accept(lex::Tok::Comma)) items.push_back(parse_type());
        expect(lex::Tok::RParen);
        return ty_ch(items.size() == 1 ? items[0] : ty_prod(std::move(items)));
    }

    // --- multi-binder input desugaring -------------------------------------

    // `?c(x,u)` binds one tuple and projects the components in the
    // continuation: x becomes z.1 and u becomes z.2 for a fresh z. Branch
    // continuations contain no prefixes, so the components can only occur in
    // expression positions and the rewrite is total.
    std::vector<std::string> pendingInputBinders_;

    ProcessPtr subst_proc_positions(const ProcessPtr& p, const std::string& var, const ExprPtr& repl) {
        if (!p) return p;
        if (const auto* inst = std::get_if<Process::Instance>(&p->node))
            return mk_instance(inst->entity, subst_expr(inst->arg, var, repl), subst_expr(inst->loc, var, repl),
                               p->span);
        if (const auto* par = std::get_if<Process::Par>(&p->node))
            return mk_par(subst_proc_positions(par->left, var, repl),
                          subst_proc_positions(par->right, var, repl), p->span);
        if (const auto* r = std::get_if<Process::Restrict>(&p->node)) {
            Restriction decl = r->decl;
            decl.rate = subst_expr(decl.rate, var, repl);
            decl.radius = subst_expr(decl.radius, var, repl);
            if (decl.name == var) return mk_restrict(decl, r->body, p->span);
            return mk_restrict(decl, subst_proc_positions(r->body, var, repl), p->span);
        }
        return p;
    }

    Branch desugar_multi_input(Branch b, const std::vector<std::string>& binders) {
        auto& in = std::get<Prefix::Input>(b.prefix.node);
        std::set<std::string> avoid;
        detail::all_idents_proc(b.cont, avoid);
        std::string joined;
        for (const auto& x : binders) joined += joined.empty() ? x : "_" + x;
        std::string z = avoid.count(joined) ? detail::fresh_against(joined, avoid) : joined;
        ProcessPtr cont = b.cont;
        for (size_t i = 0; i < binders.size(); ++i)
            cont = subst_proc_positions(cont, binders[i], mk_proj(mk_ident(z, b.prefix.span), static_cast<int>(i + 1)));
        in.binder = z;
        b.cont = cont;
        return b;
    }
};

inline Program parse_program(const std::string& source, const std::string& filename = "<input>") {
    Parser p(source, filename);
    Program prog = p.parse_program();
    return prog;
}

inline ExprPtr parse_expr_string(const std::string& source) {
    Parser p(source);
    return p.parse_expression_only();
}

} // namespace lbs
