#include "flowsift/flows.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace flowsift::flows {

std::string to_string(Proto p) { return p == Proto::TCP ? "TCP" : "UDP"; }

Proto proto_from_string(const std::string& s) {
    if (s == "TCP" || s == "tcp") return Proto::TCP;
    if (s == "UDP" || s == "udp") return Proto::UDP;
    throw Error("unknown protocol '" + s + "'");
}

namespace {

bool key_less(const FlowKey& a, const FlowKey& b) {
    return std::tie(a.src_ip, a.dst_ip, a.src_port, a.dst_port, a.protocol) <
           std::tie(b.src_ip, b.dst_ip, b.src_port, b.dst_port, b.protocol);
}

}  // namespace

std::vector<Flow> assemble_flows(const std::vector<PacketRecord>& packets) {
    for (std::size_t i = 0; i < packets.size(); ++i) {
        if (packets[i].length < 1)
            throw Error("malformed packet record at index " + std::to_string(i) +
                        ": non-positive length");
    }
    // Stable sort by timestamp keeps input order for ties.
    std::vector<std::size_t> order(packets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return packets[a].timestamp < packets[b].timestamp;
    });

    std::map<FlowKey, Flow, decltype(&key_less)> groups(&key_less);
    for (std::size_t idx : order) {
        const PacketRecord& p = packets[idx];
        FlowKey k{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol};
        auto [it, inserted] = groups.try_emplace(k);
        if (inserted) {
            it->second.key = k;
            it->second.first_ts = p.timestamp;
        }
        it->second.lengths.push_back(p.length);
    }

    std::vector<Flow> out;
    out.reserve(groups.size());
    for (auto& [k, f] : groups) out.push_back(std::move(f));
    std::stable_sort(out.begin(), out.end(),
                     [](const Flow& a, const Flow& b) { return a.first_ts < b.first_ts; });
    return out;
}

LengthSequence tokenize(const Flow& flow, int n, long max_len) {
    if (n < 1) throw Error("tokenize: n must be >= 1");
    if (max_len < 1) throw Error("tokenize: max_len must be >= 1");
    LengthSequence seq;
    seq.tokens.assign(n, 0);
    seq.true_len = static_cast<int>(std::min<std::size_t>(n, flow.lengths.size()));
    for (int i = 0; i < seq.true_len; ++i)
        seq.tokens[i] = static_cast<int>(std::min(flow.lengths[i], max_len));
    return seq;
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

long parse_long(const std::string& s, const std::string& what, int lineno) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw Error("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
    return v;
}

double parse_double(const std::string& s, const std::string& what, int lineno) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error("line " + std::to_string(lineno) + ": bad " + what + " '" + s + "'");
    }
}

}  // namespace

std::vector<LabeledFlow> load_flow_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open flow file '" + path + "'");
    std::vector<LabeledFlow> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, ',');
        if (fields.size() != 7 && fields.size() != 8)
            throw Error("line " + std::to_string(lineno) +
                        ": expected 7 or 8 comma-separated fields, got " +
                        std::to_string(fields.size()));
        LabeledFlow lf;
        lf.flow.key.src_ip = fields[0];
        lf.flow.key.dst_ip = fields[1];
        lf.flow.key.src_port = static_cast<int>(parse_long(fields[2], "src_port", lineno));
        lf.flow.key.dst_port = static_cast<int>(parse_long(fields[3], "dst_port", lineno));
        try {
            lf.flow.key.protocol = proto_from_string(fields[4]);
        } catch (const Error& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
        lf.flow.first_ts = parse_double(fields[5], "first_ts", lineno);
        for (const auto& tok : split(fields[6], ' ')) {
            if (tok.empty()) continue;
            long len = parse_long(tok, "packet length", lineno);
            if (len < 1)
                throw Error("line " + std::to_string(lineno) + ": non-positive packet length");
            lf.flow.lengths.push_back(len);
        }
        if (lf.flow.lengths.empty())
            throw Error("line " + std::to_string(lineno) + ": empty length sequence");
        if (fields.size() == 8) {
            long lbl = parse_long(fields[7], "label", lineno);
            if (lbl != 0 && lbl != 1)
                throw Error("line " + std::to_string(lineno) + ": label must be 0 or 1");
            lf.label = static_cast<int>(lbl);
        }
        out.push_back(std::move(lf));
    }
    return out;
}

void save_flow_file(const std::vector<LabeledFlow>& flows, const std::string& path,
                    const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write flow file '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    char buf[64];
    for (const auto& lf : flows) {
        const Flow& f = lf.flow;
        out << f.key.src_ip << ',' << f.key.dst_ip << ',' << f.key.src_port << ','
            << f.key.dst_port << ',' << to_string(f.key.protocol) << ',';
        std::snprintf(buf, sizeof buf, "%.17g", f.first_ts);
        out << buf << ',';
        for (std::size_t i = 0; i < f.lengths.size(); ++i) {
            if (i) out << ' ';
            out << f.lengths[i];
        }
        if (lf.label) out << ',' << *lf.label;
        out << '\n';
    }
}

std::vector<PacketRecord> load_packet_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open packet file '" + path + "'");
    std::vector<PacketRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, ',');
        if (fields.size() != 7)
            throw Error("line " + std::to_string(lineno) + ": expected 7 fields");
        PacketRecord p;
        p.src_ip = fields[0];
        p.dst_ip = fields[1];
        p.src_port = static_cast<int>(parse_long(fields[2], "src_port", lineno));
        p.dst_port = static_cast<int>(parse_long(fields[3], "dst_port", lineno));
        try {
            p.protocol = proto_from_string(fields[4]);
        } catch (const Error& e) {
            throw Error("line " + std::to_string(lineno) + ": " + e.what());
        }
        p.timestamp = parse_double(fields[5], "timestamp", lineno);
        p.length = parse_long(fields[6], "length", lineno);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace flowsift::flows
