#pragma once

#include "ftpram/field.hpp"
#include "ftpram/preprocess.hpp"
#include "ftpram/substrate.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftpram {

struct Packet {
    std::uint32_t id = 0;  // 1..n
    Elem value = 0;
    bool operator==(const Packet&) const = default;
};

/// One packet per processor when the input is cut into stripes of k strings;
/// values[s] is the packet value of stripe s.
struct StripedPacket {
    std::uint32_t id = 0;
    std::vector<Elem> values;
    bool operator==(const StripedPacket&) const = default;
};

class CapacityError : public std::length_error {
public:
    CapacityError(const std::string& what, std::size_t required_k)
        : std::length_error(what), required_k_(required_k) {}
    std::size_t required_k() const { return required_k_; }

private:
    std::size_t required_k_;
};

class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// v_i = g(w^i) for i = 1..n with g(x) = u_1 + u_2 x + ... (Horner).
std::vector<Packet> encode_strings(const std::vector<Elem>& u, std::size_t n, const Field& f);

/// Lagrange interpolation through (w^id, value); returns u_1..u_k for k = packets.size().
std::vector<Elem> decode_strings(const std::vector<Packet>& packets, const Field& f);

/// Single codeword: u_1 = byte count, the bytes packed LSB-first into u_2..u_k.
std::vector<Elem> bytes_to_strings(const std::vector<std::uint8_t>& bytes, std::size_t k, int t);
std::vector<std::uint8_t> strings_to_bytes(const std::vector<Elem>& u, int t);
std::vector<Packet> encode(const std::vector<std::uint8_t>& bytes, std::size_t n, std::size_t k, int t);
std::vector<std::uint8_t> decode(const std::vector<Packet>& packets, std::size_t k, int t);

/// Any length: 8-byte little-endian length, then the bytes, packed into t-bit
/// symbols, k symbols per stripe.
std::vector<StripedPacket> encode_striped(const std::vector<std::uint8_t>& bytes, std::size_t n, std::size_t k,
                                          int t);
std::vector<std::uint8_t> decode_striped(const std::vector<StripedPacket>& packets, std::size_t k, int t);

struct PacketFile {
    std::size_t n = 0, k = 0;
    int t = 0;
    std::vector<StripedPacket> packets;
};
/// {"n","k","t","packets":[{"id":i,"value":[v per stripe]}]}
std::string packets_to_json(const PacketFile& file);
PacketFile packets_from_json(const std::string& text);

/// Local-memory keys used by the dispersal stage.
namespace local_key {
inline constexpr Word packet_id = Word{1} << 40;
inline constexpr Word packet_stripes = packet_id + 1;
inline constexpr Word packet_value = packet_id + 2;  // + stripe
inline constexpr Word input_length = Word{2} << 40;
inline constexpr Word input_byte = input_length + 1;  // + byte index
}  // namespace local_key

/// Puts each operational processor's packet into its local memory; packets
/// for faulty processors are lost.
void deliver_packets(FaultyMachine& machine, const std::vector<StripedPacket>& packets);

struct RetrieveResult {
    std::vector<std::uint8_t> input;
    std::uint64_t rounds = 0;
    std::vector<ProcId> contributors;
};

inline constexpr double kDecodeCost = 1.0;  // C_d

/// Rounds charged for decoding: ceil(C_d * log2(n)^2), at least 1.
std::uint64_t decode_charge(std::size_t n);

/// The first k ranks of the active list decode from their packets; the
/// decoded input lands in their local memories. Throws std::runtime_error
/// when fewer than k processors are active.
RetrieveResult stage7_retrieve(FaultyMachine& machine, const MemoryMap& map, const SimulationParams& params);

}  // namespace ftpram
