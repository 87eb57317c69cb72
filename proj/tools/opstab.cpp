// opstab: batch front end for the operator-stability library.
//
//   opstab build    --spec op.txt
//   opstab orbit    --preset cantor --horizon 10000 --out orbit.csv --plot orbit.svg
//   opstab approximate --spec op.txt --mode periodic --period-min 10 --epsilon 1e-3
//   opstab decompose | classify | metric | category-demo ...
//
// Exit codes: 0 success, 1 validation failure, 2 numerical-certificate failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "opstab/opstab.hpp"

namespace fs = std::filesystem;
using namespace opstab;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitCertificate = 2;

struct CertificateFailure : Error {
    using Error::Error;
};

struct Options {
    std::string spec, other, preset, config, out, plot;
    std::optional<std::uint64_t> horizon, truncation, period_min, probes, seed;
    std::optional<double> epsilon;
    std::optional<std::string> mode;
};

/// Resolved experiment: flags override the config file, which overrides preset defaults.
struct Experiment {
    std::optional<Operator> op, other;
    std::string op_label = "operator";
    std::optional<Vector> x, y;
    std::vector<Vector> probe_vectors;
    std::uint64_t horizon = kDefaultHorizon;
    double epsilon = kDefaultEpsilon;
    std::uint64_t truncation = kDefaultTruncation;
    std::uint64_t period_min = 10;
    std::uint64_t probes = 3;
    std::uint64_t seed = 1;
    std::string mode;
    std::string out, plot;
};

// ---------------------------------------------------------------------------
// Presets

struct Preset {
    Operator op;
    std::optional<Vector> x, y;
    std::optional<double> epsilon;
};

Vector unit_coordinate(std::uint64_t slot, Complex a = 1.0) { return Vector(SparseVector::basis(slot, 0, a)); }

Vector constant_one(const Operator& op) {
    const Space s = space_of(op);
    return realize(s, test_vector(1, s.shape()));
}

Operator periodic7() {
    Diagonal d;
    for (std::uint64_t j = 0; j < 7; ++j) d.entries[j] = DiagEntry::from_angle(static_cast<std::int64_t>(j), 7);
    return d;
}

Vector uniform7() {
    SparseVector v;
    for (std::uint64_t j = 0; j < 7; ++j) v.set({0, j}, 1.0 / std::sqrt(7.0));
    return Vector(v);
}

const std::map<std::string, std::string>& preset_help() {
    static const std::map<std::string, std::string> help{
        {"identity", "I on l^2(N)"},
        {"minus-identity", "-I on l^2(N)"},
        {"shift", "unilateral shift, probes e_1 and e_5"},
        {"cantor", "multiplication by e^{2 pi i theta} on L^2(middle-thirds Cantor measure)"},
        {"lebesgue", "multiplication by e^{2 pi i theta} on L^2[0, 1)"},
        {"periodic7", "diagonal e^{2 pi i j/7} on slots 0..6, identity beyond"},
        {"rotation", "diagonal with rotation tail e^{2 pi i 3 s/7}"},
        {"cyclic8", "cyclic mix of the first 8 coordinates"},
        {"wold-mix", "direct sum of e^{2 pi i/3} I and the shift"},
        {"two-atoms", "multiplication by e^{2 pi i theta} on L^2(delta_0/2 + delta_{1/3}/2)"},
    };
    return help;
}

Preset make_preset(const std::string& name) {
    if (name == "identity") return {Operator::identity(), unit_coordinate(0), unit_coordinate(0), {}};
    if (name == "minus-identity") return {Operator::constant(DiagEntry::from_angle(1, 2)), {}, {}, {}};
    if (name == "shift") return {Operator::shift(), unit_coordinate(0), unit_coordinate(4), {}};
    if (name == "cantor") {
        Operator op = Operator::spectral(SpectralMeasure::middle_thirds_cantor());
        return {op, constant_one(op), constant_one(op), 0.1};
    }
    if (name == "lebesgue") {
        Operator op = Operator::spectral(SpectralMeasure::lebesgue());
        return {op, constant_one(op), constant_one(op), {}};
    }
    if (name == "two-atoms") {
        Operator op = Operator::spectral(SpectralMeasure::atoms_only({{0.0, 0.5}, {1.0 / 3.0, 0.5}}));
        return {op, constant_one(op), constant_one(op), {}};
    }
    if (name == "periodic7") return {periodic7(), uniform7(), uniform7(), {}};
    if (name == "rotation") return {Diagonal{{}, DiagonalTail::rotation(3, 0, 7), std::nullopt}, unit_coordinate(1), unit_coordinate(1), {}};
    if (name == "cyclic8") return {Operator::cyclic(8), unit_coordinate(0), unit_coordinate(3), {}};
    if (name == "wold-mix")
        return {Operator::direct_sum({Operator::constant(DiagEntry::from_angle(1, 3)), Operator::shift()}), {}, {}, {}};
    std::string known;
    for (const auto& [k, _] : preset_help()) known += " " + k;
    throw ValidationError("unknown preset '" + name + "'; known:" + known);
}

// ---------------------------------------------------------------------------
// Loading

std::string with_path(const std::string& path, const ValidationError& e) { return path + ": " + e.what(); }

Operator load_operator(const std::string& path) {
    try {
        return parse_operator(read_file(path));
    } catch (const ValidationError& e) {
        throw ValidationError(with_path(path, e));
    }
}

std::optional<Operator> resolve_operator(const std::string& ref, const fs::path& base) {
    if (ref.empty()) return std::nullopt;
    if (ref.rfind("preset:", 0) == 0) return make_preset(ref.substr(7)).op;
    return load_operator((base / ref).string());
}

void apply_preset(Experiment& ex, const std::string& name) {
    Preset p = make_preset(name);
    ex.op = p.op;
    ex.op_label = name;
    ex.x = p.x;
    ex.y = p.y;
    if (p.epsilon) ex.epsilon = *p.epsilon;
}

std::uint64_t config_uint(const Node& n) {
    expect_args(n, 1);
    return parse_uint(n.args[0], n.line);
}

void load_config(Experiment& ex, const std::string& path) {
    std::vector<Node> roots;
    try {
        roots = parse_tree(read_file(path));
        if (roots.size() != 1 || roots[0].key != "experiment")
            throw ValidationError("expected a single top-level 'experiment' node");
        const Node& root = roots[0];
        expect_keys(root, {"spec", "preset", "other", "operator", "horizon", "epsilon", "truncation_J", "mode",
                           "period_min", "probes", "seed", "out", "plot", "x", "y", "probe"});
        const fs::path base = fs::path(path).parent_path();
        for (const Node& c : root.children) {
            if (c.key == "preset") {
                expect_args(c, 1);
                apply_preset(ex, c.args[0]);
            }
        }
        for (const Node& c : root.children) {
            if (c.key == "spec") {
                expect_args(c, 1);
                ex.op = resolve_operator(c.args[0], base);
                ex.op_label = c.args[0];
            } else if (c.key == "operator") {
                ex.op = operator_from(c);
                ex.op_label = "inline";
            } else if (c.key == "other") {
                expect_args(c, 1);
                ex.other = resolve_operator(c.args[0], base);
            } else if (c.key == "horizon") {
                ex.horizon = config_uint(c);
            } else if (c.key == "epsilon") {
                expect_args(c, 1);
                ex.epsilon = parse_double(c.args[0], c.line);
            } else if (c.key == "truncation_J") {
                ex.truncation = config_uint(c);
            } else if (c.key == "period_min") {
                ex.period_min = config_uint(c);
            } else if (c.key == "probes") {
                ex.probes = config_uint(c);
            } else if (c.key == "seed") {
                ex.seed = config_uint(c);
            } else if (c.key == "mode" || c.key == "out" || c.key == "plot") {
                expect_args(c, 1);
                (c.key == "mode" ? ex.mode : c.key == "out" ? ex.out : ex.plot) = c.args[0];
            } else if (c.key == "x" || c.key == "y" || c.key == "probe") {
                Node body = c;
                body.key = "vector";
                Vector v = vector_from(body);
                if (c.key == "x") ex.x = v;
                else if (c.key == "y") ex.y = v;
                else ex.probe_vectors.push_back(v);
            }
        }
    } catch (const ValidationError& e) {
        throw ValidationError(with_path(path, e));
    }
}

Experiment resolve(const Options& o) {
    Experiment ex;
    if (!o.config.empty()) load_config(ex, o.config);
    if (!o.preset.empty()) apply_preset(ex, o.preset);
    if (!o.spec.empty()) {
        ex.op = resolve_operator(o.spec, fs::current_path());
        ex.op_label = o.spec;
    }
    if (!o.other.empty()) ex.other = resolve_operator(o.other, fs::current_path());
    if (o.horizon) ex.horizon = *o.horizon;
    if (o.epsilon) ex.epsilon = *o.epsilon;
    if (o.truncation) ex.truncation = *o.truncation;
    if (o.period_min) ex.period_min = *o.period_min;
    if (o.probes) ex.probes = *o.probes;
    if (o.seed) ex.seed = *o.seed;
    if (o.mode) ex.mode = *o.mode;
    if (!o.out.empty()) ex.out = o.out;
    if (!o.plot.empty()) ex.plot = o.plot;
    if (!(ex.epsilon > 0.0)) throw ValidationError("epsilon must be positive");
    return ex;
}

const Operator& require_operator(const Experiment& ex) {
    if (!ex.op) throw ValidationError("no operator given; use --spec, --preset or a config file");
    return *ex.op;
}

// ---------------------------------------------------------------------------
// Output

void write_atomically(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw ValidationError("cannot write '" + path + "'");
        f << text;
    }
    fs::rename(tmp, path);
}

void emit(const Experiment& ex, const std::string& text) {
    std::cout << text;
    if (!ex.out.empty()) write_atomically(ex.out, text);
}

Node kv(const std::string& key, const std::string& value) { return Node(key, {value}); }
Node kv(const std::string& key, double value) { return Node(key, {format_double(value)}); }
Node kv_uint(const std::string& key, std::uint64_t value) { return Node(key, {format_uint(value)}); }
Node kv_bool(const std::string& key, bool value) { return Node(key, {value ? "true" : "false"}); }

Node complex_node(const std::string& key, Complex z) {
    return Node(key, {format_double(z.real()), format_double(z.imag())});
}

/// Probe vectors: the configured ones, else the first k test vectors of the space.
std::vector<Vector> probe_family(const Experiment& ex, const Operator& op) {
    if (!ex.probe_vectors.empty()) return ex.probe_vectors;
    const Space s = space_of(op);
    std::vector<Vector> out;
    for (std::uint64_t j = 1; j <= std::max<std::uint64_t>(1, ex.probes); ++j) out.push_back(realize(s, test_vector(j, s.shape())));
    return out;
}

std::vector<Vector> random_probes(std::uint64_t count, std::uint64_t max_slot, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_int_distribution<std::uint64_t> slot(0, max_slot);
    std::vector<Vector> out;
    for (std::uint64_t k = 0; k < count; ++k) {
        SparseVector v;
        const std::uint64_t terms = 1 + slot(rng) % 4;
        for (std::uint64_t t = 0; t < terms; ++t) v.add({0, slot(rng)}, Complex(coef(rng), coef(rng)));
        if (v.empty()) v = SparseVector::basis(0);
        out.emplace_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_build(const Experiment& ex) {
    const Operator& op = require_operator(ex);
    const std::string text = serialize(op);
    if (serialize(parse_operator(text)) != text) throw CertificateFailure("serialization does not round-trip");
    const ClassReport c = classify_operator(op);
    Node r("report", {"build"});
    r.add(kv("source", ex.op_label));
    r.add(kv("kind", op.kind_name()));
    r.add(kv_uint("branches", op.branches().size()));
    r.add(kv("class", to_string(c.cls)));
    if (c.cls == OperatorClass::unitary) r.add(Node("summary", {"unitary"}));
    else if (c.cls == OperatorClass::isometry) r.add(Node("summary", {"isometry,", "not", "unitary"}));
    r.add(kv("norm", c.norm));
    for (const Operator* b : op.branches())
        if (const auto* m = b->as<Dense>()) r.add(kv("power_iteration_norm", operator_norm_estimate(m->matrix)));
    r.add(kv("isometry_defect", c.isometry_defect));
    r.add(kv("coisometry_defect", c.coisometry_defect));
    if (const auto p = period_of(op)) r.add(kv_uint("period", *p));
    r.add(kv("hash", format_uint(operator_hash(op))));
    Node& ev = r.add(Node("evidence"));
    for (const auto& e : c.evidence) ev.add(Node("note", {"\"" + e + "\""}));
    std::cout << render_tree({r});
    if (!ex.out.empty()) write_atomically(ex.out, text);
    std::cout << text;
    return 0;
}

int cmd_orbit(const Experiment& ex) {
    const Operator& op = require_operator(ex);
    const Vector x = ex.x ? *ex.x : constant_one(op);
    const Vector y = ex.y ? *ex.y : x;
    const CorrelationSeries s = correlation_sequence(op, x, y, ex.horizon);
    const DensityProfile d = density_profile(s, ex.epsilon);
    std::string csv = "n,re,im,abs,running_D,running_A\n";
    for (std::uint64_t n = 0; n < s.values.size(); ++n) {
        const Complex c = s.values[n];
        csv += format_uint(n) + "," + format_double(c.real()) + "," + format_double(c.imag()) + "," +
               format_double(std::abs(c)) + "," + format_double(d.density[n]) + "," + format_double(s.wiener[n]) + "\n";
    }
    if (ex.out.empty()) std::cout << csv;
    else write_atomically(ex.out, csv);
    if (!ex.plot.empty()) {
        std::vector<double> mods;
        for (Complex c : s.values) mods.push_back(std::abs(c));
        const double top = std::max(1.0, s.tail_max.empty() ? 1.0 : s.tail_max[0]);
        PlotPanel a{"|<T^n x, y>|  (" + ex.op_label + ")", {{"|c_n|", mods, "#1f4e9c"}}, 0.0, top};
        PlotPanel b{"running density D(N), eps = " + format_double(ex.epsilon), {{"D(N)", d.density, "#b5361c"}}, 0.0, 1.0};
        write_atomically(ex.plot, render_svg({a, b}, "n"));
    }
    if (!ex.out.empty()) {
        Node r("report", {"orbit"});
        r.add(kv("source", ex.op_label));
        r.add(kv_uint("horizon", ex.horizon));
        r.add(kv("epsilon", ex.epsilon));
        r.add(kv("density", d.at_horizon()));
        r.add(kv("lower_density", d.lower_density));
        r.add(kv("wiener", s.wiener.back()));
        r.add(kv("hash", format_uint(s.op_hash)));
        std::cout << render_tree({r});
    }
    return 0;
}

Node approx_node(const ApproxReport& a) {
    Node n("approximation");
    n.add(kv("requested_epsilon", a.requested_epsilon));
    n.add(kv("achieved", a.achieved));
    n.add(kv("bound", a.bound));
    if (a.period) n.add(kv_uint("period", *a.period));
    if (a.period_floor) n.add(kv_uint("period_floor", *a.period_floor));
    n.add(kv("certificate", "\"" + a.certificate + "\""));
    for (std::size_t k = 0; k < a.forward_errors.size(); ++k) {
        Node& p = n.add(Node("probe", {format_uint(k)}));
        p.add(kv("forward_error", a.forward_errors[k]));
        if (k < a.adjoint_errors.size()) p.add(kv("adjoint_error", a.adjoint_errors[k]));
    }
    for (const auto& [name, v] : a.figures) n.add(kv(name, v));
    return n;
}

int cmd_approximate(const Experiment& ex) {
    const std::string mode = ex.mode.empty() ? "periodic" : ex.mode;
    Node r("report", {"approximate"});
    r.add(kv("mode", mode));
    std::optional<Operator> result;
    ApproxReport rep;
    if (mode == "identity") {
        AwsIdentity a = aws_approx_identity(ex.period_min);
        rep = a.report;
        result = a.op;
    } else {
        const Operator& op = require_operator(ex);
        r.add(kv("source", ex.op_label));
        if (mode != "periodic" && mode != "aws") throw ValidationError("mode must be periodic, aws or identity");
        const ClassReport c = classify_operator(op);
        if (mode == "periodic" && c.cls == OperatorClass::unitary && !op.as<DirectSum>() && !op.as<RightShift>()) {
            auto [t, a] = periodic_approx_unitary(op, ex.period_min, ex.epsilon);
            result = t;
            rep = a;
        } else {
            const IsometryApprox a = approx_isometry(op, mode == "aws" ? ApproxMode::aws : ApproxMode::periodic,
                                                     ex.period_min, ex.epsilon, probe_family(ex, op));
            result = a.op;
            rep = a.report;
            r.add(kv_uint("shift_multiplicity", a.wold.shift_multiplicity));
        }
    }
    r.add(approx_node(rep));
    const bool errors_ok =
        std::all_of(rep.forward_errors.begin(), rep.forward_errors.end(), [&](double e) { return e < ex.epsilon; }) &&
        std::all_of(rep.adjoint_errors.begin(), rep.adjoint_errors.end(), [&](double e) { return e < ex.epsilon; });
    const bool period_ok = !rep.period || !rep.period_floor || *rep.period > *rep.period_floor;
    const bool bound_ok = mode == "identity" || rep.achieved <= ex.epsilon;
    const bool ok = errors_ok && period_ok && bound_ok;
    r.add(kv_bool("certified", ok));
    std::cout << render_tree({r});
    if (!ex.out.empty()) write_atomically(ex.out, serialize(*result));
    return ok ? 0 : kExitCertificate;
}

int cmd_decompose(const Experiment& ex) {
    const Operator& op = require_operator(ex);
    const ClassReport c = classify_operator(op);
    std::string mode = ex.mode;
    if (mode.empty()) mode = c.cls >= OperatorClass::isometry ? "wold" : "jgdl";
    Node r("report", {"decompose"});
    r.add(kv("source", ex.op_label));
    r.add(kv("mode", mode));
    if (mode == "wold") {
        const WoldSplit w = wold_decompose(op, std::max<std::uint64_t>(1, std::min<std::uint64_t>(ex.horizon, 64)));
        Node& u = r.add(Node("unitary_branches"));
        for (auto b : w.unitary_branches) u.args.push_back(format_uint(b));
        Node& s = r.add(Node("shift_branches"));
        for (auto b : w.shift_branches) s.args.push_back(format_uint(b));
        r.add(kv_uint("shift_multiplicity", w.shift_multiplicity));
        r.add(kv_uint("wandering_dimension", w.wandering_basis.size()));
        r.add(kv_bool("numerical", w.numerical));
        r.add(kv("range_defect", w.range_defect));
        if (w.unitary_part) r.add(to_node(*w.unitary_part)).key = "unitary_part";
        for (const Vector& v : w.wandering_basis) r.add(to_node(v)).key = "wandering";
    } else if (mode == "jgdl") {
        const JgdlSplit j = jgdl_split(op);
        r.add(kv_uint("reversible_pairs", j.reversible_basis.size()));
        r.add(kv_bool("basis_complete", j.basis_complete));
        r.add(kv_bool("partial", j.partial));
        r.add(kv("max_residual", j.max_residual));
        r.add(kv("max_reducing_residual", j.max_reducing_residual));
        r.add(kv_bool("reducing_verified", j.reducing_verified));
        for (const auto& p : j.reversible_basis) {
            Node& n = r.add(to_node(p.vector));
            n.key = "eigenvector";
            n.args = {format_double(p.gamma.real()), format_double(p.gamma.imag())};
        }
        const Vector x = ex.x ? *ex.x : probe_family(ex, op).front();
        r.add(to_node(j.stable_projection(x))).key = "stable_part_of_x";
        if (!j.reducing_verified) {
            std::cout << render_tree({r});
            return kExitCertificate;
        }
    } else {
        throw ValidationError("mode must be wold or jgdl");
    }
    emit(ex, render_tree({r}));
    return 0;
}

int cmd_classify(const Experiment& ex) {
    const Operator& op = require_operator(ex);
    const ClassReport c = classify_operator(op);
    Node r("report", {"classify"});
    r.add(kv("source", ex.op_label));
    r.add(kv("class", to_string(c.cls)));
    if (c.cls == OperatorClass::none) {
        emit(ex, render_tree({r}));
        return 0;
    }
    std::vector<std::pair<Vector, Vector>> pairs;
    if (ex.x) pairs.emplace_back(*ex.x, ex.y ? *ex.y : *ex.x);
    for (const Vector& v : probe_family(ex, op)) pairs.emplace_back(v, v);
    const StabilityVerdict v = classify_stability(op, pairs, ex.horizon, ex.epsilon);
    r.add(kv("verdict", to_string(v.verdict)));
    r.add(kv_uint("horizon", v.horizon));
    r.add(kv("epsilon", v.epsilon));
    r.add(kv_bool("point_spectrum_found", v.point_spectrum_found));
    r.add(kv_bool("spectrum_partial", v.spectrum_partial));
    for (const auto& w : v.witnesses) {
        Node& n = r.add(complex_node("eigen_witness", w.gamma));
        n.args.push_back(format_uint(w.branch));
    }
    r.add(kv("weak_decay_evidence", v.weak_decay_evidence));
    for (std::size_t k = 0; k < v.probes.size(); ++k) {
        Node& p = r.add(Node("probe", {format_uint(k)}));
        p.add(kv("tail_sup", v.probes[k].tail_sup));
        p.add(kv_bool("recurrent", v.probes[k].recurrent));
        p.add(kv("density", v.probes[k].density));
        p.add(kv("lower_density", v.probes[k].lower_density));
    }
    emit(ex, render_tree({r}));
    return 0;
}

int cmd_metric(const Experiment& ex) {
    const Operator& a = require_operator(ex);
    const Operator b = ex.other ? *ex.other : make_preset("minus-identity").op;
    const OperatorClass ca = classify_operator(a).cls, cb = classify_operator(b).cls;
    Node r("report", {"metric"});
    r.add(kv_uint("truncation_J", ex.truncation));
    auto add = [&](const char* name, const MetricValue& m) {
        Node& n = r.add(Node(name));
        n.add(kv("partial", m.partial));
        n.add(kv("tail_bound", m.tail_bound));
        n.add(kv("upper", m.partial + m.tail_bound));
    };
    if (std::min(ca, cb) >= OperatorClass::unitary) add("strong_star", metric_strong_star(a, b, ex.truncation));
    if (std::min(ca, cb) >= OperatorClass::isometry) add("strong", metric_strong(a, b, ex.truncation));
    if (std::min(ca, cb) >= OperatorClass::contraction) add("weak", metric_weak(a, b, ex.truncation));
    else throw ClassMismatch("metrics need contractions");
    emit(ex, render_tree({r}));
    return 0;
}

int cmd_category_demo(const Experiment& ex) {
    Node r("report", {"category-demo"});
    bool ok = true;

    // (a) A periodic unitary leaves N_n.
    {
        const Operator u = periodic7();
        MembershipParams p;
        p.x = uniform7();
        p.n = 1;
        const Membership m = set_membership(u, CategorySet::N_n, p, ex.horizon);
        Node& a = r.add(Node("periodic_escape"));
        a.add(kv_uint("period", *period_of(u)));
        a.add(kv_uint("n", p.n));
        a.add(kv("decision", to_string(m.decision)));
        if (m.witness) a.add(kv_uint("violating_k", *m.witness));
        a.add(kv("value", m.value));
        ok = ok && m.decision == Decision::out && m.witness && *m.witness <= 7;
    }
    // (b) An eigenvector near x_j keeps |<U^n x_j, x_j>| above 1/3.
    {
        Diagonal d;
        d.entries[0] = DiagEntry::from_angle(1, 5);
        d.tail = DiagonalTail::constant_of(DiagEntry::from_angle(2, 9));
        const Operator u = d;
        const Vector x = unit_coordinate(0);
        SparseVector xj = SparseVector::basis(0);
        xj.set({0, 1}, 0.25);
        MembershipParams p;
        p.x = Vector(xj);
        p.k = 3;
        p.eigen_hint = x;
        const Membership m = set_membership(u, CategorySet::W_jk_complement, p, ex.horizon);
        const EigenBoundReport e = eigenvector_bound_check(u, x, Vector(xj), std::min<std::uint64_t>(ex.horizon, 1000));
        Node& b = r.add(Node("eigen_witness_exclusion"));
        b.add(kv("distance", e.distance));
        b.add(kv("bound", e.bound));
        b.add(kv("min_abs", e.min_abs));
        b.add(kv_bool("bound_holds", e.holds));
        b.add(kv_bool("exceeds_one_third", e.exceeds_third));
        b.add(kv("in_W_j3", m.decision == Decision::in ? "out" : m.decision == Decision::out ? "in" : "undecided"));
        b.add(kv("reason", "\"" + m.reason + "\""));
        ok = ok && e.holds && e.exceeds_third && m.decision == Decision::in;
    }
    // (c) Cyclic mixes converge to the shift.
    {
        const std::uint64_t support = 8;
        const auto probes = random_probes(std::max<std::uint64_t>(1, ex.probes), support - 1, ex.seed);
        std::vector<Operator> ts;
        for (std::uint64_t m = 1; m <= 2 * support; ++m) ts.push_back(Operator::cyclic(m));
        const WeakStrongReport w = weak_to_strong_check(ts, Operator::shift(), probes);
        Node& c = r.add(Node("cyclic_to_shift"));
        c.add(kv_uint("probes", probes.size()));
        c.add(kv_bool("hypothesis_holds", w.all_hypotheses));
        c.add(kv_bool("chain_holds", w.all_chains));
        c.add(kv("max_expansion_residual", w.max_expansion_residual));
        std::vector<double> worst(ts.size(), 0.0);
        for (const auto& row : w.rows) worst[row.index] = std::max(worst[row.index], std::sqrt(row.lhs));
        for (std::size_t m = 0; m < ts.size(); ++m) c.add(Node("strong_error", {format_uint(m + 1), format_double(worst[m])}));
        ok = ok && w.all_hypotheses && w.all_chains && worst.back() == 0.0;
    }
    r.add(kv_bool("all_expectations_met", ok));
    emit(ex, render_tree({r}));
    return ok ? 0 : kExitCertificate;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Operator-stability experiments: orbits, approximants, decompositions, metrics."};
    app.require_subcommand(1);
    Options o;
    app.add_option("--spec", o.spec, "operator spec file (or preset:<name>)");
    app.add_option("--other", o.other, "second operator for 'metric' (file or preset:<name>)");
    app.add_option("--preset", o.preset, "named preset: identity, minus-identity, shift, cantor, lebesgue, periodic7, "
                                         "rotation, cyclic8, wold-mix, two-atoms");
    app.add_option("--config", o.config, "experiment config file");
    app.add_option("--out", o.out, "output file (CSV for orbit, report or spec otherwise)");
    app.add_option("--plot", o.plot, "SVG plot file (orbit)");
    app.add_option("--horizon", o.horizon, "orbit horizon N");
    app.add_option("--epsilon", o.epsilon, "threshold / approximation accuracy");
    app.add_option("--truncation-J", o.truncation, "metric truncation J");
    app.add_option("--mode", o.mode, "approximate: periodic|aws|identity; decompose: wold|jgdl");
    app.add_option("--period-min", o.period_min, "period floor N for approximants");
    app.add_option("--probes", o.probes, "number of probe vectors");
    app.add_option("--seed", o.seed, "seed for random probes");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"build", "validate a spec, print its canonical form and class"},
        {"orbit", "correlation sequence <T^n x, y> as CSV"},
        {"approximate", "periodic or almost-weakly-stable approximant"},
        {"decompose", "Wold or reversible/stable decomposition"},
        {"classify", "operator class and stability verdict"},
        {"metric", "strong*, strong and weak distances"},
        {"category-demo", "set-membership and weak-to-strong demonstrations"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        const Experiment ex = resolve(o);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "build") return cmd_build(ex);
        if (cmd == "orbit") return cmd_orbit(ex);
        if (cmd == "approximate") return cmd_approximate(ex);
        if (cmd == "decompose") return cmd_decompose(ex);
        if (cmd == "classify") return cmd_classify(ex);
        if (cmd == "metric") return cmd_metric(ex);
        return cmd_category_demo(ex);
    } catch (const NumericalError& e) {
        std::cerr << "opstab: numerical certificate failed: " << e.what() << " (best estimate "
                  << format_double(e.best_estimate()) << ")\n";
        return kExitCertificate;
    } catch (const CertificateFailure& e) {
        std::cerr << "opstab: " << e.what() << "\n";
        return kExitCertificate;
    } catch (const Error& e) {
        std::cerr << "opstab: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "opstab: " << e.what() << "\n";
        return kExitValidation;
    }
}
