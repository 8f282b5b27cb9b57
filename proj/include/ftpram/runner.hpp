#pragma once

#include "ftpram/faults.hpp"
#include "ftpram/params.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/simulator.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ftpram {

struct RunConfig {
    std::string program_text;
    std::vector<Word> data;
    std::size_t n = 0, m = 0;
    std::size_t n_sim = 0, m_sim = 0;
    Variant variant = Variant::erew;
    FaultSpec faults;
    std::uint64_t budget = kDefaultBudget;
    int beta = 0;  // 0: layout minimum
    bool verify = false;
    std::function<void(std::uint64_t, std::size_t)> trace;
};

struct RunReport {
    SimulationParams params;
    std::size_t faulty_processors = 0, faulty_cells = 0;
    std::size_t active_count = 0;
    std::size_t good_segments = 0;  // whole-memory census
    MemoryMap map;
    std::uint64_t rounds_stage7 = 0;
    bool input_recovered = false;
    SimResult sim;
    std::vector<Word> ideal_memory;
    std::uint64_t ideal_steps = 0;
    std::uint64_t total_rounds = 0;
    std::uint64_t conflicts = 0;
    bool oracle_match = false;
    bool active_bound = false;
    bool segment_bound = false;

    bool ok() const
    {
        return oracle_match && conflicts == 0 && active_bound && segment_bound && input_recovered &&
               sim.violations.empty();
    }
};

/// Program text and data words as one byte string for dispersal:
/// 4-byte length, text, then 8 bytes per data word (little endian).
std::vector<std::uint8_t> pack_input(const std::string& program_text, const std::vector<Word>& data);
void unpack_input(const std::vector<std::uint8_t>& bytes, std::string& program_text, std::vector<Word>& data);

/// Parameters and fault pattern for a configuration; throws ParameterError
/// listing every violated normality condition.
SimulationParams checked_params(const RunConfig& cfg, FaultPattern& pattern);

/// Good segments in the whole memory, whoever owns the block.
std::size_t census_good_segments(const FaultyMachine& machine, const SimulationParams& params);

/// Full pipeline: dispersal, preprocessing, retrieval, simulation and the
/// fault-free oracle run.
RunReport run_experiment(const RunConfig& cfg);

/// Stable key order.
std::string report_to_json(const RunReport& r);

}  // namespace ftpram
