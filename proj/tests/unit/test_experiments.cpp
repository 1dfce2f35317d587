#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "carnot/experiments.hpp"

using namespace carnot;
using namespace carnot::experiments;

namespace {

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("config parsing")
{
    auto c = parse_config("# comment\nframe = engel\nexperiment = gromov\nseed = 7\nout = somewhere\n\n"
                          "[params]\nsamples = 10\nradius = 2\n[gromov]\nradius = 0.5 # inline\n[cone]\npoints = 3\n");
    CHECK(c.frame == "engel");
    CHECK(c.experiment == "gromov");
    CHECK(c.seed == 7);
    CHECK(c.out == "somewhere");
    CHECK(c.params.str("samples") == "10");
    CHECK(c.params.num("radius") == 0.5);
    CHECK_FALSE(c.params.has("points"));

    CHECK_THROWS_AS(parse_config("frame engel\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[gromov\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed = -1\n"), ConfigError);
}

TEST_CASE("typed parameters")
{
    Params p;
    p.set("a", "0.1, -2,3e-1");
    p.set("n", "4");
    p.set("bad", "x1");
    auto l = p.list("a");
    REQUIRE(l.size() == 3);
    CHECK(l[1] == -2.0);
    CHECK(l[2] == 0.3);
    CHECK(p.integer("n") == 4);
    Vec v = p.vec("a", 4);
    CHECK(v[3] == 0.0);
    CHECK(p.vec("a", 2).size() == 2);
    CHECK_THROWS_AS(p.num("bad"), ConfigError);
    CHECK_THROWS_AS(p.integer("a"), ConfigError);
    CHECK_THROWS_AS(p.str("missing"), ConfigError);
}

TEST_CASE("registry")
{
    const auto& reg = registry();
    CHECK(reg.size() == 13);
    std::set<std::string> ids;
    std::set<int> rows;
    for (const auto& e : reg) {
        ids.insert(e.id);
        CHECK_FALSE(e.criteria.empty());
        rows.insert(e.criteria.begin(), e.criteria.end());
    }
    CHECK(ids.size() == 13);
    for (int r = 1; r <= 13; ++r)
        CHECK(rows.count(r) == 1);

    CHECK(edit_distance("kitten", "sitting") == 3);
    try {
        find_experiment("hausdorf-dim");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("'hausdorff-dim'") != std::string::npos);
    }
    CHECK(list_experiments().find("approx-defect") != std::string::npos);

    Config c;
    c.experiment = "cone";
    c.params.set("nonsense", "1");
    CHECK_THROWS_AS(run(c), ConfigError);
    c.params = Params{};
    c.frame = "heisenberg";
    CHECK_THROWS_AS(run(c), ConfigError);
}

TEST_CASE("named maps")
{
    Vec p(3);
    p << 0.3, -0.5, 2.0;
    auto m = named_map("x+y", 3);
    CHECK(m(p)[0] == doctest::Approx(-0.2));
    auto q = named_map("2*x*t - 0.5*y + x2", 3);
    CHECK(q(p)[0] == doctest::Approx(2 * 0.3 * 2.0 + 0.25 + 2.0));
    Mat J = q.jacobian(p);
    CHECK(J(0, 0) == doctest::Approx(4.0));
    CHECK(J(0, 1) == doctest::Approx(-0.5));
    CHECK(J(0, 2) == doctest::Approx(0.6 + 1.0));
    CHECK(named_map("t", 4)(Vec::Constant(4, 1.5))[0] == 1.5);
    CHECK_THROWS_AS(named_map("z", 3), ConfigError);
    CHECK_THROWS_AS(named_map("x3", 3), ConfigError);
    CHECK_THROWS_AS(named_map("x+", 3), ConfigError);
}

TEST_CASE("polynomial frames from JSON")
{
    const std::string text = R"({"grading": [2, 3],
        "fields": [[[[1, [0, 0, 0]]], [], [[-0.5, [0, 1, 0]]]],
                   [[], [[1, [0, 0, 0]]], [[0.5, [1, 0, 0]]]],
                   [[], [], [[1, [0, 0, 0]]]]]})";
    auto f = polynomial_frame_from_json(text, "poly");
    auto h = frames::heisenberg1();
    Vec p(3);
    p << 0.4, -0.7, 0.2;
    CHECK((f->frame(p) - h->frame(p)).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 3; ++i)
        CHECK((f->jacobian(i, p) - h->jacobian(i, p)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(f->domain().hi[0] == 1.0);
    CHECK(frames::validate_carnot(*f, 10, 1).ok());

    CHECK_THROWS_AS(polynomial_frame_from_json("{", "x"), ConfigError);
    CHECK_THROWS_AS(polynomial_frame_from_json(R"({"grading": [2, 3], "fields": []})", "x"), ConfigError);
    CHECK_THROWS_AS(load_frame("missing.json"), ConfigError);
    CHECK(load_frame("engel")->dim() == 4);
}

TEST_CASE("exit codes")
{
    CHECK(exit_code(ConfigError("x")) == 2);
    CHECK(exit_code(LeftDomain("x")) == 3);
    CHECK(exit_code(NoConvergence("x")) == 4);
    CHECK(exit_code(GuardNotVanishing("x")) == 5);
    CHECK(exit_code(SingularFrame("x")) == 6);
    Report r;
    CHECK(exit_code(r) == 0);
    r.assertions.push_back({1, "a", 1.0, "<", 0.5, 0.0, false});
    CHECK(exit_code(r) == 1);
    CHECK(exit_code_help().find("GuardNotVanishing") != std::string::npos);
}

TEST_CASE("reports are deterministic")
{
    Config c;
    c.frame = "rototranslation";
    c.experiment = "gromov";
    c.seed = 3;
    c.params.set("samples", "20");
    auto a = run(c), b = run(c);
    REQUIRE(a.tables.size() == 1);
    CHECK(table_csv(a.tables[0]) == table_csv(b.tables[0]));
    CHECK(summary_json(a) == summary_json(b));
    CHECK(a.parameters.at("samples") == "20");
    CHECK(a.parameters.at("radius") == "1.0");

    const auto dir = std::filesystem::temp_directory_path() / "carnot_report_test";
    std::filesystem::remove_all(dir);
    write_report(a, dir.string());
    CHECK(slurp(dir / "gromov.csv") == table_csv(a.tables[0]));
    CHECK(slurp(dir / "summary.json").find("\"experiment\": \"gromov\"") != std::string::npos);
    std::filesystem::remove_all(dir);

    Table t{"t", {"a", "b"}, {{0.1, std::nan("")}, {1.0 / 3.0, INFINITY}}};
    CHECK(table_csv(t) == "a,b\n0.10000000000000001,nan\n0.33333333333333331,inf\n");
}

TEST_CASE("experiments fail with the documented errors")
{
    Config c;
    c.frame = "rototranslation";
    c.experiment = "hc-curve";
    CHECK_THROWS_AS(run(c), ConfigError);
    c.experiment = "gromov";
    c.params.set("eps", "0.1");
    CHECK_THROWS_AS(run(c), ConfigError);
    // A box far outside the chart leaves the domain.
    c.experiment = "connect";
    c.params = Params{};
    c.params.set("radius", "3.5");
    c.params.set("direction", "1,1,1");
    CHECK_THROWS(run(c));
}
