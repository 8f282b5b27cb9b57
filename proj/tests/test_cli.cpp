#include "doctest.h"

#include "ftpram/isa.hpp"
#include "ftpram/params.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace ftpram;
namespace fs = std::filesystem;

namespace {

struct Scratch {
    fs::path dir;
    Scratch()
    {
        dir = fs::temp_directory_path() / ("ftpram_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    void put(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }
    std::string get(const std::string& name) const
    {
        std::ifstream in(path(name));
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    }
};

int cli(const std::string& args, const std::string& out = "/dev/null")
{
    const std::string cmd = std::string(FTPRAM_CLI_PATH) + " " + args + " >" + out + " 2>/dev/null";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("cli check-params")
{
    Scratch s;
    CHECK(cli("check-params --fp 0.3 --fs 0.3 --n 16 --m 1000000 --beta 2", s.path("p.json")) == 0);
    auto j = nlohmann::json::parse(s.get("p.json"));
    // 0.3 + 0.3 * a/(a-1) * m/(m-n) < 0.8 first at a = 3
    CHECK(j["alpha"] == 3);
    CHECK(j["normal"] == true);
    auto lib = derive_params(0.2, 0.1, 32, 1 << 15);
    CHECK(cli("check-params --fp 0.2 --fs 0.1 --n 32 --m 32768", s.path("q.json")) == 0);
    auto q = nlohmann::json::parse(s.get("q.json"));
    CHECK(q["alpha"] == lib.alpha);
    CHECK(q["k"] == lib.k);
    CHECK(cli("check-params --fp 0.6 --fs 0.5 --n 16 --m 4096") == 1);
}

TEST_CASE("cli codec round trip")
{
    Scratch s;
    s.put("in.txt", "packets of a dispersed file\nsecond line\n");
    REQUIRE(cli("codec encode --input " + s.path("in.txt") + " --output " + s.path("p.json") + " --n 9") == 0);
    auto j = nlohmann::json::parse(s.get("p.json"));
    CHECK(j["k"] == 5);
    CHECK(j["packets"].size() == 9);
    CHECK(cli("codec decode --input " + s.path("p.json") + " --output " + s.path("a.txt") + " --ids 9,3,7,1,5") == 0);
    CHECK(s.get("a.txt") == s.get("in.txt"));
    CHECK(cli("codec decode --input " + s.path("p.json") + " --output " + s.path("b.txt")) == 0);
    CHECK(s.get("b.txt") == s.get("in.txt"));
    CHECK(cli("codec decode --input " + s.path("p.json") + " --output " + s.path("c.txt") + " --ids 1,2") != 0);
}

TEST_CASE("cli rejects non-normal fault patterns")
{
    Scratch s;
    std::string cells;
    for (int a = 0; a < 512; ++a) cells += (a ? "," : "") + std::to_string(a);
    s.put("dead.json", "{\"faulty_processors\":[],\"faulty_cells\":[" + cells + "]}");
    CHECK(cli("preprocess-only --n 8 --m 512 --faults " + s.path("dead.json")) != 0);

    s.put("prog.asm", programs::write_all());
    CHECK(cli("run --program " + s.path("prog.asm") + " --n 16 --m 4096 --faults '{\"kind\":\"random\",\"fp\":0.5,"
              "\"fs\":0.5,\"seed\":1}'") != 0);
}

TEST_CASE("cli run is deterministic and reports the metrics schema")
{
    Scratch s;
    s.put("prog.asm", programs::prefix_sum());
    s.put("data.txt", "1 1 1 1 1 1 1 1\n");
    const std::string args = "run --program " + s.path("prog.asm") + " --data " + s.path("data.txt") +
                             " --n 16 --m 4000 --nsim 8 --seed 3 --faults '{\"kind\":\"random\",\"fp\":0.2,"
                             "\"fs\":0.2}' --verify --dump " + s.path("dump.txt") + " --metrics ";
    REQUIRE(cli(args + s.path("a.json")) == 0);
    REQUIRE(cli(args + s.path("b.json")) == 0);
    CHECK(s.get("a.json") == s.get("b.json"));
    CHECK(parse_data(s.get("dump.txt")) == std::vector<Word>{1, 2, 3, 4, 5, 6, 7, 8});

    auto j = nlohmann::ordered_json::parse(s.get("a.json"));
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    const std::vector<std::string> want = {
        "alpha", "beta", "gamma", "delta", "t", "k", "n", "m", "faulty_processors", "faulty_cells",
        "active_count", "good_segments", "participants", "m_virtual", "memory_tree_depth", "stage_rounds",
        "rounds_preprocessing", "rounds_stage7", "rounds_install", "steps", "access_steps", "rounds_access", "max_load",
        "rounds_per_step", "total_rounds", "conflicts", "input_recovered", "active_bound", "segment_bound",
        "invariant_violations", "oracle_match"};
    CHECK(keys == want);
    CHECK(j["oracle_match"] == true);
    CHECK(j["conflicts"] == 0);
    CHECK(j["stage_rounds"].size() == 6);
}
