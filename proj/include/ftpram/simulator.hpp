#pragma once

// Simulation of a fault-free PRAM program on the preprocessed faulty machine.
// Simulated address a lives at virtual address P + a, where P is the size of
// the program image written in front of the data.

#include "ftpram/isa.hpp"
#include "ftpram/organized.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/substrate.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ftpram {

struct AccessRequest {
    std::size_t rank = 0;  // active rank making the access
    Address vaddr = 0;
};

/// Simulated processor j (1-based) -> rank floor((j-1)*A/n_sim).
std::vector<std::size_t> assign_simulated(std::size_t active, std::size_t n_sim);

struct SimOptions {
    /// Compare every translation with the flat table and check every
    /// organized tree; findings go to SimResult::violations.
    bool verify = false;
};

struct TranslateStats {
    std::uint64_t rounds = 0;
    std::uint64_t construction_rounds = 0;  // charged, EREW only
    std::uint64_t trees = 0;
    std::uint64_t merge_calls[4] = {0, 0, 0, 0};
    std::vector<std::string> violations;
};

/// Root-to-leaf walk of every requester in lockstep (CREW and CRCW):
/// depth reads per request, then all know their storage cells together.
std::vector<Address> translate_concurrent(FaultyMachine& machine, const MemoryMap& map,
                                          const std::vector<AccessRequest>& reqs, TranslateStats* stats = nullptr);

/// Organized-tree translation (EREW): requests of ranks beyond the processor
/// tree are handed to their partners, trees are built over the processor
/// tree and walk down the memory tree splitting where their addresses part.
std::vector<Address> translate_organized(FaultyMachine& machine, const MemoryMap& map,
                                         const std::vector<AccessRequest>& reqs, TranslateStats* stats = nullptr,
                                         bool verify = false);

/// Dispatch on the machine variant. At most one request per rank.
std::vector<Address> translate(FaultyMachine& machine, const MemoryMap& map, const std::vector<AccessRequest>& reqs,
                               TranslateStats* stats = nullptr, bool verify = false);

/// Two words per instruction: op | a<<8 | b<<16 | c<<24 | target<<32, then imm.
std::vector<Word> encode_program(const Program& prog);

/// Storage cells of the memory-tree leaves, in order (inspection only).
std::vector<Address> memory_tree_inorder(const FaultyMachine& machine, const MemoryMap& map);

struct Installed {
    std::size_t program_words = 0;
    std::size_t m_sim = 0;
    std::uint64_t rounds = 0;
};

/// Writes the program image and the data (zero-padded to m_sim words) from
/// virtual address 0 through virtual writes. Throws std::length_error when
/// they do not fit m_virtual.
Installed install_input(FaultyMachine& machine, const MemoryMap& map, const Program& prog,
                        const std::vector<Word>& data, std::size_t m_sim, const SimOptions& opt = {},
                        TranslateStats* stats = nullptr);

/// Simulated memory as currently stored (inspection only).
std::vector<Word> read_simulated(const FaultyMachine& machine, const MemoryMap& map, const Installed& inst);

struct SimResult {
    std::vector<Word> memory;
    std::uint64_t steps = 0;
    std::uint64_t access_steps = 0;
    std::uint64_t rounds_access = 0;  // rounds spent in steps with accesses
    std::vector<std::uint64_t> rounds_per_step;
    std::uint64_t rounds_install = 0;
    std::uint64_t rounds_total = 0;
    std::size_t max_load = 0;
    TranslateStats translate;
    std::vector<std::string> violations;
};

/// Installs the input, then runs the program step by step. Semantic errors
/// and budget exhaustion surface as in run_ideal.
SimResult simulate_program(FaultyMachine& machine, const MemoryMap& map, const Program& prog,
                           const std::vector<Word>& data, std::size_t n_sim, std::size_t m_sim,
                           std::uint64_t budget = kDefaultBudget, const SimOptions& opt = {});

}  // namespace ftpram
