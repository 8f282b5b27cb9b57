#pragma once

// A small SPMD assembly language and its fault-free reference interpreter.

#include "ftpram/substrate.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftpram {

enum class Op : std::uint8_t { loadi, mov, add, sub, mul, read, write, jmp, beq, blt, halt };

inline constexpr int kGeneralRegisters = 16;
inline constexpr int kRegPid = 16;  // read-only
inline constexpr int kRegNp = 17;   // read-only

struct Instruction {
    Op op = Op::halt;
    int a = 0, b = 0, c = 0;  // register operands in source order
    Word imm = 0;
    std::string label;         // jump target name
    std::size_t target = 0;    // resolved instruction index
    int line = 0;

    /// Field-wise equality ignoring the source line.
    bool same(const Instruction& o) const;
};

struct Program {
    std::vector<Instruction> code;
    std::map<std::string, std::size_t> labels;
    std::string source;

    bool operator==(const Program& o) const;
};

class ParseError : public std::runtime_error {
public:
    ParseError(int line, const std::string& what);
    int line() const { return line_; }

private:
    int line_;
};

/// A run broke the variant's access rules or addressed outside memory.
class SemanticError : public std::runtime_error {
public:
    SemanticError(std::uint64_t step, Address cell, std::vector<ProcId> procs, const std::string& what);
    std::uint64_t step() const { return step_; }
    Address cell() const { return cell_; }
    const std::vector<ProcId>& procs() const { return procs_; }

private:
    std::uint64_t step_;
    Address cell_;
    std::vector<ProcId> procs_;
};

class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Program parse_program(const std::string& text);
/// Canonical text; parse_program(print_program(p)) == p.
std::string print_program(const Program& p);

/// Whitespace-separated decimal or 0x-prefixed hex words.
std::vector<Word> parse_data(const std::string& text);

struct ProcState {
    std::array<Word, kGeneralRegisters> reg{};
    std::size_t pc = 0;
    bool halted = false;
    std::uint64_t steps = 0;
};

/// The shared access an instruction needs, if any.
struct PendingAccess {
    bool active = false;
    AccessMode mode = AccessMode::read;
    Address address = 0;
    Word value = 0;  // for writes
    int reg = 0;     // destination register for reads
};

/// Executes one instruction of processor `pid` up to its shared access:
/// non-memory instructions complete here, READ completes in finish_read.
PendingAccess begin_step(const Program& prog, ProcState& s, ProcId pid, std::size_t np);
void finish_read(ProcState& s, const PendingAccess& acc, Word value);

inline constexpr std::uint64_t kDefaultBudget = 1'000'000;

struct IdealResult {
    std::vector<Word> memory;
    std::uint64_t steps = 0;
    std::vector<std::vector<AccessRecord>> ledgers;  // per step, when kept
};

/// Lockstep SPMD run of n_sim processors over m_sim cells, data preloaded at
/// address 0. `budget` bounds the steps of every processor.
IdealResult run_ideal(const Program& prog, const std::vector<Word>& data, std::size_t n_sim, std::size_t m_sim,
                      Variant variant, std::uint64_t budget = kDefaultBudget, bool keep_ledgers = false);

/// Checks one step's accesses against the variant; returns committed writes
/// (lowest PID wins) or throws SemanticError.
std::vector<std::pair<Address, Word>> resolve_step(Variant variant, std::uint64_t step,
                                                   const std::vector<AccessRecord>& ledger);

namespace programs {
/// Processor i writes 1 at address i-1.
std::string write_all();
/// Inclusive prefix sums of A[0..NP-1] by doubling.
std::string prefix_sum();
/// Odd-even transposition sort of A[0..NP-1].
std::string odd_even_sort();
/// Straight-line program of `length` random instructions; memory accesses
/// go to c*NP + PID-1 (exclusive), plus shared cells when the variant allows.
std::string random_straight_line(std::mt19937_64& rng, std::size_t n_sim, std::size_t m_sim, Variant variant,
                                 int length);
}  // namespace programs

}  // namespace ftpram
