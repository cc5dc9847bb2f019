#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowsift/common.hpp"

namespace flowsift::flows {

enum class Proto { TCP, UDP };

std::string to_string(Proto p);
Proto proto_from_string(const std::string& s);

struct PacketRecord {
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    Proto protocol = Proto::TCP;
    double timestamp = 0.0;
    long length = 0;  // bytes, >= 1
};

/// Directional five-tuple: A->B and B->A are distinct keys.
struct FlowKey {
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    Proto protocol = Proto::TCP;

    bool operator==(const FlowKey&) const = default;
};

struct Flow {
    FlowKey key;
    double first_ts = 0.0;
    std::vector<long> lengths;  // ordered by packet timestamp
};

struct LengthSequence {
    std::vector<int> tokens;  // exactly n entries, 0 = pad
    int true_len = 0;
};

/// Group packets by directional five-tuple, lengths in timestamp order
/// (ties keep input order), flows ordered by first timestamp.
/// Throws Error naming the record index for non-positive lengths.
std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& packets);

/// Keep the first n head-packet lengths, clamp to max_len, zero-pad.
/// Vocabulary size is max_len + 1 with token 0 reserved for padding.
LengthSequence tokenize(const Flow& flow, int n, long max_len);

struct LabeledFlow {
    Flow flow;
    std::optional<int> label;  // 0 normal, 1 malicious
};

// Line format: src_ip,dst_ip,src_port,dst_port,proto,first_ts,len1 len2 ...
// with an optional trailing ,label column.
std::vector<LabeledFlow> load_flow_file(const std::string& path);
void save_flow_file(const std::vector<LabeledFlow>& flows,
                    const std::string& path,
                    const std::string& provenance = "");

std::vector<PacketRecord> load_packet_file(const std::string& path);

}  // namespace flowsift::flows
