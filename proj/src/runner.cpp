#include "ftpram/runner.hpp"

#include "ftpram/dispersal.hpp"
#include "ftpram/kernels.hpp"

#include "json.hpp"

#include <cmath>

namespace ftpram {

std::vector<std::uint8_t> pack_input(const std::string& program_text, const std::vector<Word>& data)
{
    std::vector<std::uint8_t> out;
    const auto len = static_cast<std::uint32_t>(program_text.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
    out.insert(out.end(), program_text.begin(), program_text.end());
    for (Word w : data)
        for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
    return out;
}

void unpack_input(const std::vector<std::uint8_t>& bytes, std::string& program_text, std::vector<Word>& data)
{
    if (bytes.size() < 4) throw InputError("input too short for its header");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t{bytes[static_cast<std::size_t>(i)]} << (8 * i);
    if (4 + std::size_t{len} > bytes.size() || (bytes.size() - 4 - len) % 8 != 0)
        throw InputError("input length fields are inconsistent");
    program_text.assign(bytes.begin() + 4, bytes.begin() + 4 + len);
    data.clear();
    for (std::size_t p = 4 + len; p < bytes.size(); p += 8) {
        Word w = 0;
        for (int i = 0; i < 8; ++i) w |= Word{bytes[p + static_cast<std::size_t>(i)]} << (8 * i);
        data.push_back(w);
    }
}

SimulationParams checked_params(const RunConfig& cfg, FaultPattern& pattern)
{
    if (cfg.n == 0 || cfg.m == 0) throw ParameterError("n and m must be positive");
    auto [fp, fs] = effective_fractions(cfg.faults, cfg.n, cfg.m);
    SimulationParams p = derive_params(fp, fs, cfg.n, cfg.m, cfg.beta);
    auto violations = validate_normal(p);
    if (violations.empty()) {
        pattern = generate_pattern(cfg.faults, cfg.n, cfg.m, static_cast<std::size_t>(p.alpha),
                                   static_cast<std::size_t>(p.beta));
        violations = validate_normal(p, pattern.faulty_processors.size(), pattern.faulty_cells.size());
    }
    if (!violations.empty()) {
        std::string msg = "parameters are not normal:";
        for (const auto& v : violations) msg += "\n  " + v;
        throw ParameterError(msg);
    }
    return p;
}

std::size_t census_good_segments(const FaultyMachine& machine, const SimulationParams& params)
{
    std::vector<std::uint8_t> cell_ok(machine.m()), proc_ok(machine.n());
    for (Address a = 0; a < machine.m(); ++a) cell_ok[a] = machine.cell_ok(a);
    for (ProcId p = 1; p <= machine.n(); ++p) proc_ok[p - 1] = machine.processor_ok(p);
    return kernels::census_serial(cell_ok, proc_ok, static_cast<std::size_t>(params.alpha),
                                  static_cast<std::size_t>(params.beta))
        .good_segments;
}

RunReport run_experiment(const RunConfig& cfg)
{
    RunReport rep;
    if (cfg.n_sim == 0 || cfg.n_sim > cfg.n) throw ParameterError("n_sim must be in [1, n]");
    if (cfg.m_sim == 0) throw ParameterError("m_sim must be positive");
    FaultPattern pattern;
    rep.params = checked_params(cfg, pattern);
    const auto& p = rep.params;
    rep.faulty_processors = pattern.faulty_processors.size();
    rep.faulty_cells = pattern.faulty_cells.size();

    // the program must parse before anything runs on the faulty machine
    parse_program(cfg.program_text);

    FaultyMachine machine(cfg.n, cfg.m, cfg.variant, pattern);
    if (cfg.trace) machine.set_trace(cfg.trace);
    rep.good_segments = census_good_segments(machine, p);

    const auto input = pack_input(cfg.program_text, cfg.data);
    deliver_packets(machine, encode_striped(input, cfg.n, p.k, p.t));

    rep.map = preprocess(machine, p);
    rep.active_count = rep.map.active.size();
    rep.active_bound = rep.active_count >= p.k;
    rep.segment_bound = static_cast<double>(rep.good_segments) >= p.delta * static_cast<double>(cfg.m);

    auto got = stage7_retrieve(machine, rep.map, p);
    rep.rounds_stage7 = got.rounds;
    rep.input_recovered = got.input == input;
    std::string text;
    std::vector<Word> data;
    unpack_input(got.input, text, data);
    const Program prog = parse_program(text);

    rep.sim = simulate_program(machine, rep.map, prog, data, cfg.n_sim, cfg.m_sim, cfg.budget,
                               SimOptions{cfg.verify});
    auto ideal = run_ideal(parse_program(cfg.program_text), cfg.data, cfg.n_sim, cfg.m_sim, cfg.variant, cfg.budget);
    rep.ideal_memory = ideal.memory;
    rep.ideal_steps = ideal.steps;
    rep.oracle_match = rep.sim.memory == ideal.memory && rep.sim.steps == ideal.steps;
    rep.total_rounds = machine.round();
    rep.conflicts = machine.total_conflicts();
    return rep;
}

std::string report_to_json(const RunReport& r)
{
    nlohmann::ordered_json j;
    j["alpha"] = r.params.alpha;
    j["beta"] = r.params.beta;
    j["gamma"] = r.params.gamma;
    j["delta"] = r.params.delta;
    j["t"] = r.params.t;
    j["k"] = r.params.k;
    j["n"] = r.params.n;
    j["m"] = r.params.m;
    j["faulty_processors"] = r.faulty_processors;
    j["faulty_cells"] = r.faulty_cells;
    j["active_count"] = r.active_count;
    j["good_segments"] = r.good_segments;
    j["participants"] = r.map.participants;
    j["m_virtual"] = r.map.m_virtual;
    j["memory_tree_depth"] = r.map.depth;
    nlohmann::ordered_json stages;
    for (const auto& s : r.map.stages) stages[s.name] = s.rounds;
    j["stage_rounds"] = stages;
    j["rounds_preprocessing"] = r.map.rounds();
    j["rounds_stage7"] = r.rounds_stage7;
    j["rounds_install"] = r.sim.rounds_install;
    j["steps"] = r.sim.steps;
    j["access_steps"] = r.sim.access_steps;
    j["rounds_access"] = r.sim.rounds_access;
    j["max_load"] = r.sim.max_load;
    j["rounds_per_step"] = r.sim.rounds_per_step;
    j["total_rounds"] = r.total_rounds;
    j["conflicts"] = r.conflicts;
    j["input_recovered"] = r.input_recovered;
    j["active_bound"] = r.active_bound;
    j["segment_bound"] = r.segment_bound;
    j["invariant_violations"] = r.sim.violations.size();
    j["oracle_match"] = r.oracle_match;
    return j.dump(2);
}

}  // namespace ftpram
