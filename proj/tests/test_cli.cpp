#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result run(const std::string& args, bool with_stderr = false)
{
    const std::string cmd = std::string(MINIVEM_CLI) + " " + args + (with_stderr ? " 2>&1" : " 2>/dev/null");
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::map<std::string, std::string> key_values(const std::string& text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string key, value;
    while (in >> key && std::getline(in >> std::ws, value)) kv[key] = value;
    return kv;
}

std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "minivem_cli_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

} // namespace

TEST(Cli, PatchSolveIsExact)
{
    const Result r = run("solve --case patch --k 1 --family hexagonal --level 1");
    ASSERT_EQ(r.code, 0);
    const auto kv = key_values(r.out);
    for (const char* key : {"err0_u", "err1_u", "err0_p", "velocity_dof_error", "pressure_dof_error", "bubble_dof_max"}) {
        ASSERT_TRUE(kv.count(key)) << key;
        EXPECT_LE(std::stod(kv.at(key)), 1e-9) << key;
    }
    EXPECT_EQ(kv.at("system_size"), "367");
}

TEST(Cli, UnknownFlagExitsWithUsage)
{
    const Result r = run("solve --bogus", true);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("Usage"), std::string::npos);
    EXPECT_EQ(run("frobnicate").code, 2);
    EXPECT_EQ(run("solve --k 0").code, 2);
    EXPECT_EQ(run("solve --family square").code, 2);
    EXPECT_EQ(run("convergence --levels 3..1").code, 2);
}

TEST(Cli, RuntimeErrorExitsWithOne)
{
    EXPECT_EQ(run("solve --mesh /nonexistent/mesh.json").code, 1);
}

TEST(Cli, ConvergenceCsvShape)
{
    const auto path = scratch("conv.csv");
    const Result r = run("convergence --cases test1 --families hexagonal --levels 1..4 --k 1,2 --out " + path.string());
    ASSERT_EQ(r.code, 0);
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "family,level,k,h,n_dofs,err0_u,err1_u,err0_p,rate0_u,rate1_u,rate0_p,seconds");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), 11) << line;
        EXPECT_EQ(line.rfind("hexagonal,", 0), 0u) << line;
    }
    EXPECT_EQ(rows, 8);
}

TEST(Cli, IdenticalInvocationsGiveIdenticalCsv)
{
    const auto a = scratch("det_a.csv"), b = scratch("det_b.csv");
    const std::string args = "convergence --cases test2 --families voronoi,random_polygons --levels 1,2 --k 1 --out ";
    ASSERT_EQ(run(args + a.string()).code, 0);
    ASSERT_EQ(run(args + b.string()).code, 0);
    EXPECT_FALSE(read_file(a).empty());
    EXPECT_EQ(read_file(a), read_file(b));

    const std::string sweep = "alpha-sweep --family voronoi --level 1 --k 1 --alphas 1e-3,1,1e3";
    const Result s1 = run(sweep), s2 = run(sweep);
    ASSERT_EQ(s1.code, 0);
    EXPECT_EQ(s1.out, s2.out);
    EXPECT_EQ(s1.out.rfind("basis,k,alpha,cond\n", 0), 0u);
}

TEST(Cli, MeshGenerateAndCheck)
{
    const auto path = scratch("mesh.json");
    ASSERT_EQ(run("mesh generate --family diamond --level 2 --out " + path.string()).code, 0);
    const Result r = run("mesh check --mesh " + path.string());
    EXPECT_EQ(r.code, 0);
    EXPECT_FALSE(r.out.empty());
}
