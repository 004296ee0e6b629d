#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "whipdyn/io.hpp"

using namespace whipdyn;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir() {
    const fs::path dir = fs::temp_directory_path() / "whipdyn_scenario_io";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST(ScenarioIO, SaveLoadSaveIsByteIdentical) {
    std::vector<Scenario> all;
    for (const auto& name : preset_names()) all.push_back(preset(name));
    Scenario tab = tabulate(preset("smooth"), Grid1D(21));
    tab.name = "smooth_tabulated";
    tab.eps = 0.03;
    all.push_back(tab);
    const fs::path dir = scratch_dir();
    for (const auto& sc : all) {
        const fs::path a = dir / (sc.name + "_a.ini"), b = dir / (sc.name + "_b.ini");
        save_scenario(sc, a);
        const Scenario back = load_scenario(a);
        save_scenario(back, b);
        EXPECT_EQ(slurp(a), slurp(b)) << sc.name;
        // sampled data is bit-identical as well
        const auto d0 = sample(sc, Grid1D(21)), d1 = sample(back, Grid1D(21));
        for (std::size_t i = 0; i < 21; ++i) {
            EXPECT_EQ(d0.alpha[i], d1.alpha[i]) << sc.name;
            EXPECT_EQ(d0.beta[i], d1.beta[i]) << sc.name;
        }
        EXPECT_EQ(back.bc, sc.bc);
        EXPECT_EQ(back.eps, sc.eps);
    }
}

TEST(ScenarioIO, ShippedConfigsMatchPresets) {
    const fs::path dir = fs::path(WHIPDYN_SOURCE_DIR) / "scenarios";
    for (const auto& name : preset_names()) {
        const fs::path p = dir / (name + ".ini");
        ASSERT_TRUE(fs::exists(p)) << p;
        EXPECT_EQ(slurp(p), format_scenario(preset(name))) << name;
    }
    EXPECT_NO_THROW(validate(load_scenario(dir / "smooth_tabulated.ini"), Grid1D(21)));
}

TEST(ScenarioIO, OverlongLinkNamesNode) {
    Scenario sc = tabulate(preset("hanging"), Grid1D(11));
    sc.alpha.table[3] = sc.alpha.table[4] - Vec3(0, 0, 0.12);  // |alpha_s| = 1.2 on link 3
    try {
        validate(sc, Grid1D(11));
        FAIL() << "expected a validation error";
    } catch (const ValidationError& e) {
        ASSERT_FALSE(e.violations().empty());
        EXPECT_EQ(e.violations().front().node, 3);
        EXPECT_NEAR(e.violations().front().value, 1.2, 1e-9);
        EXPECT_NE(std::string(e.what()).find("node 3"), std::string::npos);
    }
}

TEST(ScenarioIO, MissingGravityIsParseError) {
    const std::string text = "[scenario]\nname = x\nbc = whip\nhorizon = 1\n\n[alpha]\nkind = line\n";
    try {
        parse_scenario(text);
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.key(), "g");
    }
}

TEST(ScenarioIO, MalformedInputsAreRejected) {
    const std::string head = "[scenario]\nname = x\nbc = whip\nhorizon = 1\ng = 0 0 -9.8\n";
    EXPECT_NO_THROW(parse_scenario(head + "[alpha]\nkind = line\n"));
    try {
        parse_scenario(head + "[alpha]\nkind = line\ndirection = 0 0 x\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.key(), "direction");
        EXPECT_EQ(e.line(), 8u);
    }
    EXPECT_THROW(parse_scenario(head + "colour = red\n[alpha]\nkind = line\n"), ParseError);
    EXPECT_THROW(parse_scenario(head + "[gamma]\n[alpha]\nkind = line\n"), ParseError);
    EXPECT_THROW(parse_scenario("[scenario]\nname = x\nbc = knot\nhorizon = 1\ng = 0 0 0\n[alpha]\n"), ParseError);
    EXPECT_THROW(parse_scenario(head + "[alpha]\nkind = line\npoint = 1 2\n"), ParseError);
}

TEST(ScenarioIO, UnknownPresetListsKnownOnes) {
    try {
        resolve_scenario("no_such_preset");
        FAIL();
    } catch (const UnknownPresetError& e) {
        EXPECT_EQ(e.known(), preset_names());
        for (const auto& n : preset_names()) EXPECT_NE(std::string(e.what()).find(n), std::string::npos);
    }
    EXPECT_EQ(resolve_scenario("ring").bc, BoundaryFamily::Periodic);
}

TEST(ScenarioIO, PresetsSatisfyTheirInvariants) {
    for (const auto& name : preset_names()) {
        const Scenario sc = preset(name);
        EXPECT_TRUE(scenario_violations(sc, Grid1D(101)).empty()) << name;
        const auto d = sample(sc, Grid1D(101));
        const auto comp = compatibility_residuals(d.alpha, d.beta, stencil_for(sc.bc));
        // folded has a corner; smooth is slack data (|alpha_s| < 1) for the regularized solver
        if (name != "folded" && name != "smooth") {
            EXPECT_LE(comp.r1, 1e-6) << name;
        }
        if (name != "folded") {
            EXPECT_LE(comp.r2, 1e-6) << name;
        }
    }
}

TEST(ScenarioIO, PresetGeometry) {
    const Vec3 g(1.0, 0.0, -2.0);
    const auto up = sample(preset("upright", g), Grid1D(11));
    // free end at s = 0 sits straight against gravity, one unit from the fixed end
    EXPECT_LT((up.alpha[0] - (-g / g.norm())).norm(), 1e-14);
    EXPECT_LT(up.alpha[10].norm(), 1e-14);

    const auto fold = sample(preset("folded"), Grid1D(101));
    EXPECT_LT(fold.alpha[0].norm(), 1e-14);
    EXPECT_LT(fold.alpha[100].norm(), 1e-14);
    EXPECT_NEAR(fold.alpha[50].z(), -0.5, 1e-14);  // apex hangs half a unit below
    for (std::size_t i = 0; i < 101; ++i) EXPECT_GE(fold.alpha[i].z(), -0.5);
}

TEST(ScenarioIO, TensionCsvFormat) {
    const Grid1D grid(3);
    FieldScalar sigma(grid);
    sigma[0] = 0.0;
    sigma[1] = 4.9;
    sigma[2] = 9.8;
    std::ostringstream out;
    write_tension_csv(sigma, out);
    EXPECT_EQ(out.str(), "s,sigma\n0,0\n0.5,4.9\n1,9.8\n");
}
