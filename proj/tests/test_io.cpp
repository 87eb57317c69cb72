#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "opstab/io.hpp"

using namespace opstab;

namespace {

Operator everything() {
    Diagonal d;
    d.entries[0] = DiagEntry::from_angle(1, 4);
    d.entries[2] = DiagEntry::from_value({0.1, -0.3});
    d.tail = DiagonalTail::rotation(3, 1, 11);
    Diagonal c;
    c.dimension = 5;
    c.tail = DiagonalTail::cycle_of({DiagEntry::from_angle(1, 3), DiagEntry::from_value(std::polar(1.0, 0.123456789))});
    Matrix m(2, 2);
    m << Complex(0.1, 0.2), 1.0 / 3.0, Complex(0.0, -0.25), 1e-17;
    const SpectralMeasure mu({{0.125, 0.5}, {0.7, 1.0 / 7.0}}, StepFunction({0.0, 0.5, 0.75}, {1.0, 2.5}),
                             SelfSimilar{0.25, {0.0, 0.5, 0.75}, 0.3});
    SpectralSymbol sym{{0.0, 0.4, 1.0}, {DiagEntry::from_angle(2, 5), DiagEntry::from_value(std::polar(1.0, 2.0))}};
    return Operator::direct_sum({Operator(d), Operator(c), Operator::shift(3), Operator::cyclic(4, 2), Operator::dense(m),
                                 Operator::spectral(mu), Operator::spectral(SpectralMeasure::lebesgue(0.5), sym)});
}

} // namespace

TEST(Format, ShortestRoundTrip) {
    std::mt19937_64 rng(60);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int k = 0; k < 10000; ++k) {
        const double v = u(rng) * std::pow(10.0, static_cast<double>(static_cast<int>(rng() % 40) - 20));
        ASSERT_EQ(parse_double(format_double(v), 1), v);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Format, NumberErrorsCarryLines) {
    try {
        parse_double("1.5x", 7);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.line(), 7);
    }
    EXPECT_THROW(parse_uint("-3", 1), ValidationError);
    EXPECT_THROW(parse_int("3.0", 1), ValidationError);
}

TEST(Tree, ParseAndRender) {
    const auto roots = parse_tree("# comment\na 1 2\n  b\n    c x\n  d\ne\n");
    ASSERT_EQ(roots.size(), 2u);
    EXPECT_EQ(roots[0].key, "a");
    EXPECT_EQ(roots[0].args, (std::vector<std::string>{"1", "2"}));
    ASSERT_EQ(roots[0].children.size(), 2u);
    EXPECT_EQ(roots[0].children[0].children[0].line, 4);
    EXPECT_EQ(render_tree(roots), "a 1 2\n  b\n    c x\n  d\ne\n");
}

TEST(Tree, RejectsBadIndentation) {
    EXPECT_THROW(parse_tree("a\n\tb\n"), ValidationError);
    EXPECT_THROW(parse_tree("a\n   b\n"), ValidationError);
    EXPECT_THROW(parse_tree("a\n    b\n"), ValidationError);
    EXPECT_THROW(parse_tree("  a\n"), ValidationError);
}

TEST(OperatorIo, ByteIdenticalRoundTrip) {
    const Operator op = everything();
    const std::string text = serialize(op);
    const Operator back = parse_operator(text);
    EXPECT_EQ(back, op);
    EXPECT_EQ(serialize(back), text);
    EXPECT_EQ(operator_hash(back), operator_hash(op));
    EXPECT_NE(operator_hash(op), operator_hash(Operator::shift()));
}

TEST(VectorIo, RoundTrip) {
    Vector v(SparseVector::basis(3, 1, Complex(0.25, -1.0 / 3.0)));
    Field f;
    f.modes.emplace(-2, StepFunction({0.0, 0.3, 1.0}, {1.0, Complex(0.0, 2.0)}));
    f.points.emplace(0.125, Complex(-1.5, 0.0));
    v.set_field(2, f);
    const std::string text = serialize(v);
    EXPECT_EQ(parse_vector(text), v);
    EXPECT_EQ(serialize(parse_vector(text)), text);
}

TEST(OperatorIo, ErrorsCarryLineNumbers) {
    auto line_of = [](const std::string& text) {
        try {
            parse_operator(text);
        } catch (const ValidationError& e) {
            return e.line();
        }
        return -1;
    };
    EXPECT_EQ(line_of("operator diagonal\n  entry 0 angle 1 4\n  entry 1 value 1.1 0\n"), 3);
    EXPECT_EQ(line_of("operator shift\n  block 1\n  colour red\n"), 3);
    EXPECT_EQ(line_of("operator teapot\n"), 1);
    EXPECT_EQ(line_of("operator cyclic\n  period 0\n"), 1);
    EXPECT_EQ(line_of("operator diagonal\n  entry 0 angle 1\n"), 2);
}

TEST(Samples, AllParseAndRoundTrip) {
    const std::filesystem::path dir(OPSTAB_SAMPLES_DIR);
    int parsed = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() != ".op") continue;
        const std::string text = read_file(entry.path().string());
        if (entry.path().stem() == "invalid_modulus") {
            try {
                parse_operator(text);
                ADD_FAILURE() << "invalid sample accepted";
            } catch (const ValidationError& e) {
                EXPECT_EQ(e.line(), 4);
            }
            continue;
        }
        const Operator op = parse_operator(text);
        EXPECT_EQ(serialize(parse_operator(serialize(op))), serialize(op)) << entry.path();
        ++parsed;
    }
    EXPECT_GE(parsed, 10);
}
