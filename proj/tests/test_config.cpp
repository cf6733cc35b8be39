#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "sticky/config.hpp"

using namespace sticky;
namespace fs = std::filesystem;

namespace {

fs::path write_file(const std::string& name, const std::string& body) {
    fs::path p = fs::temp_directory_path() / name;
    std::ofstream(p) << body;
    return p;
}

std::string usage_message(const std::vector<std::string>& args) {
    try {
        parse_config(args);
    } catch (const UsageError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(ParseConfig, FlagsAndDefaults) {
    auto c = parse_config({"theta", "--nmax", "4", "--a", "1", "--b", "1"});
    EXPECT_EQ(c.subcommand, "theta");
    EXPECT_EQ(c.integer("nmax"), 4);
    EXPECT_EQ(c.real("a"), 1.0);
    EXPECT_EQ(c.text("method"), "quadrature");
    EXPECT_FALSE(c.boolean("fold"));
    EXPECT_EQ(c.seed, 1u);
    EXPECT_FALSE(c.deterministic);
    auto d = parse_config({"simulate", "--x0", "0,0.5", "--N", "2", "--seed", "42", "--deterministic", "--workers", "3"});
    EXPECT_EQ(d.reals("x0"), (std::vector<double>{0.0, 0.5}));
    EXPECT_EQ(d.seed, 42u);
    EXPECT_EQ(d.workers, 3u);
    EXPECT_TRUE(d.deterministic);
}

TEST(ParseConfig, FlagsOverrideFile) {
    auto file = write_file("sticky_cfg_precedence.ini", "# theta run\na = 2\nb = 0.5\n");
    auto c = parse_config({"theta", "--config", file.string(), "--a", "3"});
    EXPECT_EQ(c.real("a"), 3.0);
    EXPECT_EQ(c.real("b"), 0.5);
    auto bad = write_file("sticky_cfg_unknown.ini", "a = 2\nbogus = 1\n");
    EXPECT_THROW(parse_config({"theta", "--config", bad.string()}), UsageError);
}

TEST(ParseConfig, Errors) {
    EXPECT_EQ(usage_message({"cells", "--n", "0"}), "n must be ≥ 1");
    EXPECT_NE(usage_message({"theta", "--a", "x"}).find("key 'a'"), std::string::npos);
    EXPECT_NE(usage_message({"theta", "--frobnicate", "1"}).find("frobnicate"), std::string::npos);
    EXPECT_NE(usage_message({"nosuch"}).find("unknown subcommand"), std::string::npos);
    EXPECT_NE(usage_message({"theta", "--method", "guess"}).find("method"), std::string::npos);
    EXPECT_NE(usage_message({"theta", "--a", "-1"}).find("a"), std::string::npos);
    EXPECT_THROW(parse_config({}), UsageError);
    auto c = parse_config({"cells"});
    EXPECT_THROW(c.real("missing"), UsageError);
}

TEST(ParseConfig, OutputDirectoryFallback) {
    ::unsetenv("STICKY_FLOWS_OUT");
    EXPECT_EQ(parse_config({"cells"}).out, ".");
    ::setenv("STICKY_FLOWS_OUT", "/tmp/sticky_env_out", 1);
    EXPECT_EQ(parse_config({"cells"}).out, "/tmp/sticky_env_out");
    EXPECT_EQ(parse_config({"cells", "--out", "elsewhere"}).out, "elsewhere");
    ::unsetenv("STICKY_FLOWS_OUT");
}

TEST(CommandSpecs, EverySubcommandIsDescribed) {
    std::vector<std::string> names;
    for (const auto& c : command_specs()) names.push_back(c.name);
    EXPECT_EQ(names, (std::vector<std::string>{"theta", "cells", "marttest", "simulate", "sticky", "exits", "radial",
                                               "ballcheck", "coalesce", "kernel"}));
    for (const auto& c : command_specs()) EXPECT_NO_THROW(parse_config({c.name})) << c.name;
}

TEST(ParseConfig, HelpListsKeysWithDefaults) {
    try {
        parse_config({"theta", "--help"});
        FAIL() << "expected HelpRequested";
    } catch (const HelpRequested& h) {
        std::string text = h.what();
        EXPECT_NE(text.find("--nmax"), std::string::npos);
        EXPECT_NE(text.find("quadrature"), std::string::npos);
    }
}
