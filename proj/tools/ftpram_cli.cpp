#include "ftpram/dispersal.hpp"
#include "ftpram/faults.hpp"
#include "ftpram/params.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/runner.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

using namespace ftpram;

namespace {

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

FaultSpec load_faults(const std::string& arg, std::uint64_t seed, bool seed_given)
{
    FaultSpec spec;
    spec.kind = FaultKind::explicit_list;
    if (!arg.empty()) spec = parse_fault_spec(arg.front() == '{' ? arg : slurp(arg));
    if (seed_given) spec.seed = seed;
    return spec;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulator of a PRAM with static processor and memory faults"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "preprocess, simulate a program and compare with the fault-free run");
    std::string program_path, data_path, faults_arg, metrics_path, dump_path, variant_name = "erew";
    std::size_t n = 0, m = 0, n_sim = 0, m_sim = 0;
    std::uint64_t seed = 0, budget = kDefaultBudget;
    bool trace = false, verify = false;
    run->add_option("--program", program_path, "program file")->required();
    run->add_option("--data", data_path, "data file (whitespace-separated words)");
    run->add_option("--n", n, "processors")->required();
    run->add_option("--m", m, "shared memory cells")->required();
    run->add_option("--nsim", n_sim, "simulated processors (default n)");
    run->add_option("--msim", m_sim, "simulated memory cells (default: data length, at least n_sim)");
    run->add_option("--variant", variant_name, "erew, crew or crcw");
    auto* seed_opt = run->add_option("--seed", seed, "seed for generated fault patterns");
    run->add_option("--faults", faults_arg, "fault spec: JSON file or inline JSON");
    run->add_option("--budget", budget, "step budget per simulated processor");
    run->add_option("--metrics", metrics_path, "metrics JSON output");
    run->add_option("--dump", dump_path, "final simulated memory, one word per line");
    run->add_flag("--trace", trace, "print round index and access count of every round");
    run->add_flag("--verify", verify, "check structural invariants during the run");

    // check-params
    auto* check = app.add_subcommand("check-params", "derive the normality parameters and report violations");
    double fp = 0, fs = 0;
    int beta = 0;
    std::size_t cn = 0, cm = 0;
    check->add_option("--fp", fp, "faulty processor fraction")->required();
    check->add_option("--fs", fs, "faulty cell fraction")->required();
    check->add_option("--n", cn, "processors")->required();
    check->add_option("--m", cm, "memory cells")->required();
    check->add_option("--beta", beta, "segment size (default: layout minimum)");

    // preprocess-only
    auto* pre = app.add_subcommand("preprocess-only", "run the preprocessing stages and print the memory map");
    std::size_t pn = 0, pm = 0;
    std::string pre_faults, pre_variant = "erew";
    std::uint64_t pre_seed = 0;
    pre->add_option("--n", pn, "processors")->required();
    pre->add_option("--m", pm, "memory cells")->required();
    pre->add_option("--faults", pre_faults, "fault spec: JSON file or inline JSON");
    auto* pre_seed_opt = pre->add_option("--seed", pre_seed, "seed for generated fault patterns");
    pre->add_option("--variant", pre_variant, "erew, crew or crcw");

    // codec
    auto* codec = app.add_subcommand("codec", "disperse a file into packets or rebuild it");
    codec->require_subcommand(1);
    auto* enc = codec->add_subcommand("encode", "file -> packets JSON");
    auto* dec = codec->add_subcommand("decode", "packets JSON -> file");
    std::string in_path, out_path;
    std::size_t cdn = 0, cdk = 0;
    int cdt = 0;
    std::vector<std::uint32_t> ids;
    enc->add_option("--input", in_path)->required();
    enc->add_option("--output", out_path)->required();
    enc->add_option("--n", cdn, "packets")->required();
    enc->add_option("--k", cdk, "packets needed to decode (default ceil(n/2))");
    enc->add_option("--t", cdt, "field exponent (default: smallest with 2^t > n)");
    dec->add_option("--input", in_path)->required();
    dec->add_option("--output", out_path)->required();
    dec->add_option("--ids", ids, "packet ids to decode from (default: the first k)")->delimiter(',');

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            RunConfig cfg;
            cfg.program_text = slurp(program_path);
            if (!data_path.empty()) cfg.data = parse_data(slurp(data_path));
            cfg.n = n;
            cfg.m = m;
            cfg.n_sim = n_sim ? n_sim : n;
            cfg.m_sim = m_sim ? m_sim : std::max(cfg.data.size(), cfg.n_sim);
            cfg.variant = parse_variant(variant_name);
            cfg.faults = load_faults(faults_arg, seed, seed_opt->count() > 0);
            cfg.budget = budget;
            cfg.verify = verify;
            if (trace)
                cfg.trace = [](std::uint64_t r, std::size_t a) { std::cout << r << ' ' << a << '\n'; };
            RunReport rep = run_experiment(cfg);
            const std::string json = report_to_json(rep);
            if (metrics_path.empty())
                std::cout << json << '\n';
            else
                spit(metrics_path, json + "\n");
            if (!dump_path.empty()) {
                std::ostringstream os;
                for (Word w : rep.sim.memory) os << w << '\n';
                spit(dump_path, os.str());
            }
            if (!rep.ok()) {
                std::cerr << "run failed:" << (rep.oracle_match ? "" : " oracle mismatch")
                          << (rep.conflicts ? " access conflicts" : "") << (rep.active_bound ? "" : " too few active")
                          << (rep.segment_bound ? "" : " too few good segments")
                          << (rep.input_recovered ? "" : " input not recovered")
                          << (rep.sim.violations.empty() ? "" : " invariant violations") << '\n';
                for (const auto& v : rep.sim.violations) std::cerr << "  " << v << '\n';
                return 1;
            }
            return 0;
        }
        if (*check) {
            SimulationParams p = derive_params(fp, fs, cn, cm, beta);
            auto violations = validate_normal(p);
            std::cout << params_to_json(p, violations) << '\n';
            for (const auto& v : violations) std::cerr << "violation: " << v << '\n';
            return violations.empty() ? 0 : 1;
        }
        if (*pre) {
            RunConfig cfg;
            cfg.n = pn;
            cfg.m = pm;
            cfg.faults = load_faults(pre_faults, pre_seed, pre_seed_opt->count() > 0);
            FaultPattern pattern;
            SimulationParams p = checked_params(cfg, pattern);
            FaultyMachine machine(pn, pm, parse_variant(pre_variant), pattern);
            MemoryMap map = preprocess(machine, p);
            std::cout << memory_map_to_json(map) << '\n';
            return 0;
        }
        if (*enc) {
            const std::string text = slurp(in_path);
            PacketFile file;
            file.n = cdn;
            file.k = cdk ? cdk : (cdn + 1) / 2;
            file.t = cdt ? cdt : field_exponent(cdn);
            file.packets = encode_striped(std::vector<std::uint8_t>(text.begin(), text.end()), file.n, file.k, file.t);
            spit(out_path, packets_to_json(file) + "\n");
            return 0;
        }
        if (*dec) {
            PacketFile file = packets_from_json(slurp(in_path));
            std::vector<StripedPacket> chosen;
            if (ids.empty()) {
                if (file.packets.size() < file.k) throw InputError("fewer than k packets in the file");
                chosen.assign(file.packets.begin(), file.packets.begin() + static_cast<std::ptrdiff_t>(file.k));
            } else {
                for (auto id : ids) {
                    auto it = std::find_if(file.packets.begin(), file.packets.end(),
                                           [&](const StripedPacket& p) { return p.id == id; });
                    if (it == file.packets.end()) throw InputError("no packet with id " + std::to_string(id));
                    chosen.push_back(*it);
                }
            }
            auto bytes = decode_striped(chosen, file.k, file.t);
            spit(out_path, std::string(bytes.begin(), bytes.end()));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
