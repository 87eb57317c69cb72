#pragma once

// Plain-text tree format shared by operator specs, vectors, reports and
// experiment configs. One node per line: a key followed by space-separated
// arguments; children are indented two spaces deeper than their parent;
// '#' starts a comment. Doubles are written in shortest round-trip form, so
// serialize -> parse -> serialize is byte-identical.
//
//   operator diagonal            operator shift         operator cyclic
//     dim 4                        block 1                period 5
//     entry 0 angle 1 4                                   block 1
//     entry 2 value 0.5 0
//     tail constant angle 1 2    operator dense         operator direct_sum
//   (tail identity | constant      dim 2                  operator ...
//    angle p q | constant value    row 0 0 1 0            operator ...
//    re im | rotation a b q |      row 0 0 0 0
//    cycle + "item ..." lines)     (re im per column)
//
//   operator spectral            vector
//     measure                      entry <branch> <slot> <re> <im>
//       atom <theta> <weight>      field <branch>
//       density                      mode <m>
//         breaks 0 0.5 1               breaks ...
//         values 1 0 2 0               values <re> <im> ...
//       cantor                       point <theta> <re> <im>
//         ratio 0.333...
//         weight 1
//         digits 0 0.666...
//     symbol
//       breaks 0 0.5 1
//       piece angle 1 3
//       piece value 0 1

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "opstab/error.hpp"
#include "opstab/measure.hpp"
#include "opstab/operator.hpp"
#include "opstab/vector.hpp"

namespace opstab {

struct Node {
    std::string key;
    std::vector<std::string> args;
    std::vector<Node> children;
    int line = 0;

    Node() = default;
    Node(std::string k, std::vector<std::string> a = {}) : key(std::move(k)), args(std::move(a)) {}

    Node& add(Node child) {
        children.push_back(std::move(child));
        return children.back();
    }
    const Node* find(std::string_view k) const {
        for (const auto& c : children)
            if (c.key == k) return &c;
        return nullptr;
    }
    const Node& require(std::string_view k) const {
        if (const Node* c = find(k)) return *c;
        throw ValidationError("'" + key + "' is missing '" + std::string(k) + "'", line);
    }
};

// ---------------------------------------------------------------------------
// Scalars

inline std::string format_double(double v) {
    if (v == 0.0) return std::signbit(v) ? "-0" : "0";
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline std::string format_uint(std::uint64_t v) { return std::to_string(v); }
inline std::string format_int(std::int64_t v) { return std::to_string(v); }

inline double parse_double(const std::string& s, int line) {
    double v = 0.0;
    const char* first = s.data();
    if (!s.empty() && s[0] == '+') ++first;
    const auto r = std::from_chars(first, s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError("expected a finite number, got '" + s + "'", line);
    return v;
}

inline std::uint64_t parse_uint(const std::string& s, int line) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ValidationError("expected a nonnegative integer, got '" + s + "'", line);
    return v;
}

inline std::int64_t parse_int(const std::string& s, int line) {
    std::int64_t v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size())
        throw ValidationError("expected an integer, got '" + s + "'", line);
    return v;
}

inline void expect_args(const Node& n, std::size_t count) {
    if (n.args.size() != count)
        throw ValidationError("'" + n.key + "' takes " + std::to_string(count) + " argument(s), got " +
                                  std::to_string(n.args.size()),
                              n.line);
}

inline void expect_keys(const Node& n, std::initializer_list<std::string_view> allowed) {
    for (const auto& c : n.children)
        if (std::find(allowed.begin(), allowed.end(), c.key) == allowed.end())
            throw ValidationError("unknown key '" + c.key + "' under '" + n.key + "'", c.line);
}

// ---------------------------------------------------------------------------
// Tree syntax

inline std::vector<Node> parse_tree(std::string_view text) {
    std::vector<Node> roots;
    std::vector<Node*> stack; // stack[d] = last node at depth d
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\r')) line.remove_suffix(1);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.find('\t') != std::string_view::npos) throw ValidationError("tabs are not allowed", line_no);
        std::size_t indent = 0;
        while (indent < line.size() && line[indent] == ' ') ++indent;
        if (indent % 2 != 0) throw ValidationError("indentation must be a multiple of two spaces", line_no);
        const std::size_t depth = indent / 2;
        if (depth > stack.size()) throw ValidationError("indentation jumps more than one level", line_no);
        Node node;
        node.line = line_no;
        std::istringstream words{std::string(line.substr(indent))};
        words >> node.key;
        for (std::string w; words >> w;) node.args.push_back(w);
        stack.resize(depth);
        Node* placed = depth == 0 ? &roots.emplace_back(std::move(node)) : &stack.back()->add(std::move(node));
        stack.push_back(placed);
        if (end == text.size()) break;
    }
    return roots;
}

inline void render_node(const Node& n, std::size_t depth, std::string& out) {
    out.append(2 * depth, ' ');
    out += n.key;
    for (const auto& a : n.args) {
        out += ' ';
        out += a;
    }
    out += '\n';
    for (const auto& c : n.children) render_node(c, depth + 1, out);
}

inline std::string render_tree(const std::vector<Node>& roots) {
    std::string out;
    for (const auto& r : roots) render_node(r, 0, out);
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Step functions, measures, vectors

inline void add_step(Node& parent, const StepFunction& f) {
    Node& b = parent.add(Node("breaks"));
    for (double x : f.breakpoints()) b.args.push_back(format_double(x));
    Node& v = parent.add(Node("values"));
    for (Complex c : f.values()) {
        v.args.push_back(format_double(c.real()));
        v.args.push_back(format_double(c.imag()));
    }
}

inline StepFunction step_from(const Node& n) {
    const Node* b = n.find("breaks");
    const Node* v = n.find("values");
    if (!b && !v) return {};
    if (!b || !v) throw ValidationError("step function needs both 'breaks' and 'values'", n.line);
    std::vector<double> br;
    for (const auto& a : b->args) br.push_back(parse_double(a, b->line));
    if (v->args.size() % 2 != 0) throw ValidationError("values are (re, im) pairs", v->line);
    std::vector<Complex> vals;
    for (std::size_t k = 0; k < v->args.size(); k += 2)
        vals.emplace_back(parse_double(v->args[k], v->line), parse_double(v->args[k + 1], v->line));
    try {
        return StepFunction(std::move(br), std::move(vals));
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), b->line);
    }
}

inline Node to_node(const SpectralMeasure& mu) {
    Node n("measure");
    for (const Atom& a : mu.atoms()) n.add(Node("atom", {format_double(a.location), format_double(a.weight)}));
    if (!mu.density().breakpoints().empty()) add_step(n.add(Node("density")), mu.density());
    if (const auto& s = mu.self_similar()) {
        Node& c = n.add(Node("cantor"));
        c.add(Node("ratio", {format_double(s->ratio)}));
        c.add(Node("weight", {format_double(s->weight)}));
        Node& d = c.add(Node("digits"));
        for (double x : s->digits) d.args.push_back(format_double(x));
    }
    return n;
}

inline SpectralMeasure measure_from(const Node& n) {
    expect_keys(n, {"atom", "density", "cantor", "lebesgue"});
    std::vector<Atom> atoms;
    StepFunction density;
    std::optional<SelfSimilar> ss;
    for (const auto& c : n.children) {
        if (c.key == "atom") {
            expect_args(c, 2);
            atoms.push_back({parse_double(c.args[0], c.line), parse_double(c.args[1], c.line)});
        } else if (c.key == "density") {
            expect_keys(c, {"breaks", "values"});
            density = step_from(c);
        } else if (c.key == "lebesgue") {
            // Shorthand for a constant density on [0, 1).
            if (c.args.size() > 1) throw ValidationError("'lebesgue' takes an optional weight", c.line);
            const double w = c.args.empty() ? 1.0 : parse_double(c.args[0], c.line);
            density = density + StepFunction::indicator(0.0, 1.0, w);
        } else if (c.key == "cantor") {
            expect_keys(c, {"ratio", "weight", "digits"});
            SelfSimilar s;
            if (const Node* r = c.find("ratio")) {
                expect_args(*r, 1);
                s.ratio = parse_double(r->args[0], r->line);
            }
            if (const Node* w = c.find("weight")) {
                expect_args(*w, 1);
                s.weight = parse_double(w->args[0], w->line);
            }
            if (const Node* d = c.find("digits")) {
                s.digits.clear();
                for (const auto& a : d->args) s.digits.push_back(parse_double(a, d->line));
            }
            ss = s;
        }
    }
    try {
        return SpectralMeasure(std::move(atoms), std::move(density), std::move(ss));
    } catch (const ValidationError& e) {
        throw ValidationError(e.what(), n.line);
    }
}

inline Node to_node(const Vector& v) {
    Node n("vector");
    for (const auto& [idx, a] : v.coords().entries())
        n.add(Node("entry", {format_uint(idx.branch), format_uint(idx.slot), format_double(a.real()), format_double(a.imag())}));
    for (const auto& [b, f] : v.fields()) {
        Node& fn = n.add(Node("field", {format_uint(b)}));
        for (const auto& [m, h] : f.modes) add_step(fn.add(Node("mode", {format_int(m)})), h);
        for (const auto& [t, c] : f.points)
            fn.add(Node("point", {format_double(t), format_double(c.real()), format_double(c.imag())}));
    }
    return n;
}

inline Vector vector_from(const Node& n) {
    expect_keys(n, {"entry", "field"});
    Vector v;
    for (const auto& c : n.children) {
        if (c.key == "entry") {
            expect_args(c, 4);
            v.coords().add({parse_uint(c.args[0], c.line), parse_uint(c.args[1], c.line)},
                           Complex(parse_double(c.args[2], c.line), parse_double(c.args[3], c.line)));
        } else {
            expect_args(c, 1);
            expect_keys(c, {"mode", "point"});
            const std::uint64_t b = parse_uint(c.args[0], c.line);
            Field f;
            for (const auto& m : c.children) {
                if (m.key == "mode") {
                    expect_args(m, 1);
                    expect_keys(m, {"breaks", "values"});
                    const std::int64_t k = parse_int(m.args[0], m.line);
                    Field g;
                    g.modes.emplace(k, step_from(m));
                    f += g;
                } else {
                    expect_args(m, 3);
                    f.points[parse_double(m.args[0], m.line)] +=
                        Complex(parse_double(m.args[1], m.line), parse_double(m.args[2], m.line));
                }
            }
            Field merged = v.field(b) ? *v.field(b) : Field{};
            merged += f;
            v.set_field(b, std::move(merged));
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Operators

inline void add_entry_args(Node& n, const DiagEntry& e) {
    if (e.angle) {
        n.args.insert(n.args.end(), {"angle", format_uint(e.angle->p), format_uint(e.angle->q)});
    } else {
        n.args.insert(n.args.end(), {"value", format_double(e.value.real()), format_double(e.value.imag())});
    }
}

/// "angle p q" or "value re im" starting at args[from].
inline DiagEntry entry_from(const Node& n, std::size_t from) {
    if (n.args.size() != from + 3) throw ValidationError("expected 'angle p q' or 'value re im'", n.line);
    const std::string& kind = n.args[from];
    try {
        if (kind == "angle") {
            const std::uint64_t q = parse_uint(n.args[from + 2], n.line);
            if (q == 0) throw ValidationError("angle denominator must be >= 1", n.line);
            return DiagEntry::from_angle(parse_int(n.args[from + 1], n.line), q);
        }
        if (kind == "value")
            return DiagEntry::from_value({parse_double(n.args[from + 1], n.line), parse_double(n.args[from + 2], n.line)});
    } catch (const ValidationError& e) {
        if (e.line() > 0) throw;
        throw ValidationError(e.what(), n.line);
    }
    throw ValidationError("expected 'angle' or 'value', got '" + kind + "'", n.line);
}

inline Node to_node(const Operator& op) {
    Node n("operator", {op.kind_name()});
    if (const auto* d = op.as<Diagonal>()) {
        if (d->dimension) n.add(Node("dim", {format_uint(*d->dimension)}));
        for (const auto& [slot, e] : d->entries) add_entry_args(n.add(Node("entry", {format_uint(slot)})), e);
        Node t("tail");
        switch (d->tail.kind) {
        case DiagonalTail::Kind::identity: t.args = {"identity"}; break;
        case DiagonalTail::Kind::constant:
            t.args = {"constant"};
            add_entry_args(t, d->tail.constant);
            break;
        case DiagonalTail::Kind::rotation:
            t.args = {"rotation", format_int(d->tail.a), format_int(d->tail.b), format_uint(d->tail.q)};
            break;
        case DiagonalTail::Kind::cycle:
            t.args = {"cycle"};
            for (const auto& e : d->tail.cycle) add_entry_args(t.add(Node("item")), e);
            break;
        }
        n.add(std::move(t));
    } else if (const auto* s = op.as<RightShift>()) {
        n.add(Node("block", {format_uint(s->block)}));
    } else if (const auto* c = op.as<CyclicMix>()) {
        n.add(Node("period", {format_uint(c->period)}));
        n.add(Node("block", {format_uint(c->block)}));
    } else if (const auto* m = op.as<Dense>()) {
        n.add(Node("dim", {format_uint(static_cast<std::uint64_t>(m->matrix.rows()))}));
        for (Eigen::Index i = 0; i < m->matrix.rows(); ++i) {
            Node& r = n.add(Node("row"));
            for (Eigen::Index j = 0; j < m->matrix.cols(); ++j) {
                r.args.push_back(format_double(m->matrix(i, j).real()));
                r.args.push_back(format_double(m->matrix(i, j).imag()));
            }
        }
    } else if (const auto* u = op.as<SpectralUnitary>()) {
        n.add(to_node(*u->measure));
        if (u->symbol) {
            Node& sy = n.add(Node("symbol"));
            Node& b = sy.add(Node("breaks"));
            for (double x : u->symbol->breaks) b.args.push_back(format_double(x));
            for (const auto& e : u->symbol->values) add_entry_args(sy.add(Node("piece")), e);
        }
    } else if (const auto* ds = op.as<DirectSum>()) {
        for (const auto& p : ds->parts) n.add(to_node(p));
    }
    return n;
}

inline std::uint64_t single_uint(const Node& parent, std::string_view key, std::uint64_t fallback) {
    const Node* c = parent.find(key);
    if (!c) return fallback;
    expect_args(*c, 1);
    return parse_uint(c->args[0], c->line);
}

inline Operator operator_from(const Node& n) {
    if (n.key != "operator") throw ValidationError("expected 'operator', got '" + n.key + "'", n.line);
    expect_args(n, 1);
    const std::string& kind = n.args[0];
    try {
        if (kind == "diagonal") {
            expect_keys(n, {"dim", "entry", "tail"});
            Diagonal d;
            if (n.find("dim")) d.dimension = single_uint(n, "dim", 0);
            for (const auto& c : n.children) {
                if (c.key == "entry") {
                    if (c.args.empty()) throw ValidationError("entry needs a slot", c.line);
                    const std::uint64_t slot = parse_uint(c.args[0], c.line);
                    if (!d.entries.emplace(slot, entry_from(c, 1)).second)
                        throw ValidationError("duplicate entry for slot " + c.args[0], c.line);
                } else if (c.key == "tail") {
                    if (c.args.empty()) throw ValidationError("tail needs a rule", c.line);
                    const std::string& rule = c.args[0];
                    if (rule == "identity") {
                        expect_args(c, 1);
                        d.tail = DiagonalTail::identity();
                    } else if (rule == "constant") {
                        d.tail = DiagonalTail::constant_of(entry_from(c, 1));
                    } else if (rule == "rotation") {
                        expect_args(c, 4);
                        d.tail = DiagonalTail::rotation(parse_int(c.args[1], c.line), parse_int(c.args[2], c.line),
                                                        parse_uint(c.args[3], c.line));
                    } else if (rule == "cycle") {
                        expect_args(c, 1);
                        expect_keys(c, {"item"});
                        std::vector<DiagEntry> items;
                        for (const auto& it : c.children) items.push_back(entry_from(it, 0));
                        d.tail = DiagonalTail::cycle_of(std::move(items));
                    } else {
                        throw ValidationError("unknown tail rule '" + rule + "'", c.line);
                    }
                }
            }
            return d;
        }
        if (kind == "shift") {
            expect_keys(n, {"block"});
            return RightShift{single_uint(n, "block", 1)};
        }
        if (kind == "cyclic") {
            expect_keys(n, {"period", "block"});
            return CyclicMix{single_uint(n, "period", 1), single_uint(n, "block", 1)};
        }
        if (kind == "dense") {
            expect_keys(n, {"dim", "row"});
            const auto m = static_cast<Eigen::Index>(single_uint(n, "dim", 0));
            if (m <= 0) throw ValidationError("dense operator needs 'dim' >= 1", n.line);
            if (static_cast<std::size_t>(m) > kDenseDimensionCap) throw ValidationError("dense dimension exceeds cap", n.line);
            Matrix a = Matrix::Zero(m, m);
            Eigen::Index i = 0;
            for (const auto& c : n.children) {
                if (c.key != "row") continue;
                if (i >= m) throw ValidationError("too many rows", c.line);
                expect_args(c, static_cast<std::size_t>(2 * m));
                for (Eigen::Index j = 0; j < m; ++j)
                    a(i, j) = Complex(parse_double(c.args[static_cast<std::size_t>(2 * j)], c.line),
                                      parse_double(c.args[static_cast<std::size_t>(2 * j + 1)], c.line));
                ++i;
            }
            if (i != m) throw ValidationError("dense operator needs " + std::to_string(m) + " rows", n.line);
            return Dense{std::move(a)};
        }
        if (kind == "spectral") {
            expect_keys(n, {"measure", "symbol"});
            auto mu = std::make_shared<const SpectralMeasure>(measure_from(n.require("measure")));
            std::optional<SpectralSymbol> sym;
            if (const Node* s = n.find("symbol")) {
                expect_keys(*s, {"breaks", "piece"});
                SpectralSymbol y;
                const Node& b = s->require("breaks");
                for (const auto& a : b.args) y.breaks.push_back(parse_double(a, b.line));
                for (const auto& c : s->children)
                    if (c.key == "piece") y.values.push_back(entry_from(c, 0));
                sym = std::move(y);
            }
            return SpectralUnitary{std::move(mu), std::move(sym)};
        }
        if (kind == "direct_sum") {
            expect_keys(n, {"operator"});
            std::vector<Operator> parts;
            for (const auto& c : n.children) parts.push_back(operator_from(c));
            return DirectSum{std::move(parts)};
        }
    } catch (const ValidationError& e) {
        if (e.line() > 0) throw;
        throw ValidationError(e.what(), n.line);
    } catch (const Error& e) {
        throw ValidationError(e.what(), n.line);
    }
    throw ValidationError("unknown operator kind '" + kind + "'", n.line);
}

inline std::string serialize(const Operator& op) { return render_tree({to_node(op)}); }
inline std::string serialize(const Vector& v) { return render_tree({to_node(v)}); }

inline Operator parse_operator(std::string_view text) {
    const auto roots = parse_tree(text);
    if (roots.size() != 1) throw ValidationError("expected exactly one top-level 'operator' node");
    return operator_from(roots.front());
}

inline Vector parse_vector(std::string_view text) {
    const auto roots = parse_tree(text);
    if (roots.size() != 1 || roots.front().key != "vector")
        throw ValidationError("expected exactly one top-level 'vector' node");
    return vector_from(roots.front());
}

/// FNV-1a of the canonical serialization.
inline std::uint64_t operator_hash(const Operator& op) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize(op)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace opstab
