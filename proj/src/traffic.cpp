#include "dscore/traffic.hpp"

#include "dscore/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <tuple>

#include <json.hpp>

namespace dscore::traffic {

namespace {

const std::vector<std::string> kFlowHeader = {"start_time", "duration_s", "src_ip",  "dst_ip", "src_port",
                                              "dst_port",   "protocol",   "packets", "bytes"};

template <typename T>
T parse_number(const std::string& text, const char* field, std::size_t line) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        throw ParseError(std::string("field '") + field + "': cannot parse '" + text + "'", line);
    }
    return value;
}

double parse_double(const std::string& text, const char* field, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("field '") + field + "': cannot parse '" + text + "'", line);
    }
}

Protocol parse_protocol(const std::string& text) {
    std::string upper;
    for (const char c : text) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (upper == "TCP" || upper == "6") return Protocol::TCP;
    if (upper == "UDP" || upper == "17") return Protocol::UDP;
    return Protocol::Other;
}

using Hour = std::chrono::sys_time<std::chrono::hours>;

Hour hour_of(Timestamp t) { return std::chrono::floor<std::chrono::hours>(t); }

/// Full ordering so that every downstream sum visits flows in the same order.
bool flow_less(const FlowRecord& a, const FlowRecord& b) {
    return std::tie(a.start_time, a.direction, a.peer_ip, a.peer_port, a.device_port, a.protocol, a.packets, a.bytes,
                    a.duration) < std::tie(b.start_time, b.direction, b.peer_ip, b.peer_port, b.device_port,
                                           b.protocol, b.packets, b.bytes, b.duration);
}

std::vector<FlowRecord> sorted_copy(const std::vector<FlowRecord>& flows) {
    std::vector<FlowRecord> out = flows;
    std::sort(out.begin(), out.end(), flow_less);
    return out;
}

struct HourWindow {
    Hour first;
    std::size_t count = 0;

    std::size_t index(Timestamp t) const { return static_cast<std::size_t>((hour_of(t) - first).count()); }
};

HourWindow hour_window(const std::vector<FlowRecord>& sorted) {
    const Hour first = hour_of(sorted.front().start_time);
    const Hour last = hour_of(sorted.back().start_time);
    return HourWindow{first, static_cast<std::size_t>((last - first).count()) + 1};
}

/// Per-hour count of distinct values picked by `key` among flows matching `dir`.
template <typename Key>
std::vector<double> hourly_unique(const std::vector<FlowRecord>& sorted, const HourWindow& window, Direction dir,
                                  Key key) {
    std::vector<std::set<std::string>> seen(window.count);
    for (const auto& f : sorted) {
        if (f.direction == dir) seen[window.index(f.start_time)].insert(key(f));
    }
    std::vector<double> out;
    out.reserve(window.count);
    for (const auto& s : seen) out.push_back(static_cast<double>(s.size()));
    return out;
}

double seconds_between(Timestamp a, Timestamp b) {
    return std::chrono::duration<double>(b - a).count();
}

void extract_direction(const std::vector<FlowRecord>& sorted, Direction dir, const ExtractionConfig& config,
                       FeatureExtraction& out) {
    const bool in = dir == Direction::Inbound;
    const char suffix = in ? 'I' : 'O';
    const auto code = [&](const char* stem) { return std::string(stem) + suffix; };
    const std::string label = in ? "inbound" : "outbound";

    std::vector<const FlowRecord*> flows;
    for (const auto& f : sorted) {
        if (f.direction == dir) flows.push_back(&f);
    }
    if (flows.empty()) {
        for (const char* stem : {"IAT", "PCK", "PCS", "PCV", "ENC", "UDP"}) {
            out.missing[code(stem)] = "no " + label + " flows";
        }
        return;
    }

    if (flows.size() < 2) {
        out.missing[code("IAT")] = "fewer than two " + label + " sessions";
    } else {
        std::vector<double> gaps;
        for (std::size_t i = 1; i < flows.size(); ++i) {
            gaps.push_back(seconds_between(flows[i - 1]->start_time, flows[i]->start_time));
        }
        out.values[code("IAT")] = median(std::move(gaps));
    }

    std::vector<double> packets;
    double total_packets = 0.0;
    double total_bytes = 0.0;
    double enc_packets = 0.0;
    double udp_packets = 0.0;
    for (const auto* f : flows) {
        const auto p = static_cast<double>(f->packets);
        packets.push_back(p);
        total_packets += p;
        total_bytes += static_cast<double>(f->bytes);
        if (config.encrypted_ports.count(f->peer_port)) enc_packets += p;
        if (f->protocol == Protocol::UDP) udp_packets += p;
    }
    out.values[code("PCK")] = median(packets);
    out.values[code("PCS")] = total_bytes / static_cast<double>(flows.size());

    // Packet sizes are only known per flow: each flow contributes its mean size,
    // weighted by its packet count.
    const double mean_size = total_bytes / total_packets;
    double ss = 0.0;
    for (const auto* f : flows) {
        const double size = static_cast<double>(f->bytes) / static_cast<double>(f->packets);
        ss += static_cast<double>(f->packets) * (size - mean_size) * (size - mean_size);
    }
    out.values[code("PCV")] = std::sqrt(ss / total_packets);
    out.values[code("ENC")] = enc_packets / total_packets;
    out.values[code("UDP")] = udp_packets / total_packets;
}

}  // namespace

FlowLoad load_flows(std::istream& in, const std::string& device_ip) {
    FlowLoad out;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            if (fields != kFlowHeader) {
                throw ParseError(
                    "header must be 'start_time,duration_s,src_ip,dst_ip,src_port,dst_port,protocol,packets,bytes'",
                    line_no);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != kFlowHeader.size()) {
            throw ParseError("expected 9 fields, found " + std::to_string(fields.size()), line_no);
        }
        FlowRecord f;
        try {
            f.start_time = parse_iso8601(fields[0]);
        } catch (const InputError& e) {
            throw ParseError(std::string("field 'start_time': ") + e.what(), line_no);
        }
        f.duration = parse_double(fields[1], "duration_s", line_no);
        const auto src_port = parse_number<std::uint16_t>(fields[4], "src_port", line_no);
        const auto dst_port = parse_number<std::uint16_t>(fields[5], "dst_port", line_no);
        f.protocol = parse_protocol(fields[6]);
        f.packets = parse_number<std::uint64_t>(fields[7], "packets", line_no);
        f.bytes = parse_number<std::uint64_t>(fields[8], "bytes", line_no);
        if (f.packets < 1) throw ParseError("field 'packets': a flow carries at least one packet", line_no);
        if (f.bytes < f.packets) throw ParseError("field 'bytes': fewer bytes than packets", line_no);
        if (!(f.duration >= 0.0)) throw ParseError("field 'duration_s': negative duration", line_no);

        if (fields[2] == device_ip) {
            f.direction = Direction::Outbound;
            f.peer_ip = fields[3];
            f.device_port = src_port;
            f.peer_port = dst_port;
        } else if (fields[3] == device_ip) {
            f.direction = Direction::Inbound;
            f.peer_ip = fields[2];
            f.device_port = dst_port;
            f.peer_port = src_port;
        } else {
            ++out.skipped;
            continue;
        }
        out.flows.push_back(std::move(f));
    }
    return out;
}

FlowLoad load_flows(const std::filesystem::path& path, const std::string& device_ip) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open flow file " + path.string());
    try {
        return load_flows(in, device_ip);
    } catch (const ParseError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

const std::vector<std::string>& extracted_feature_codes() {
    static const std::vector<std::string> codes = {"CCOM", "IATI", "PCKI", "PCSI", "PCVI", "ENCI", "UDPI",
                                                   "IATO", "PCKO", "PCSO", "PCVO", "ENCO", "UDPO", "DSIP",
                                                   "DSPR", "WLPR", "SRIP"};
    return codes;
}

FeatureExtraction extract_dynamic_features(const std::vector<FlowRecord>& flows, const ExtractionConfig& config) {
    FeatureExtraction out;
    if (flows.empty()) {
        for (const auto& c : extracted_feature_codes()) out.missing[c] = "no flows";
        return out;
    }
    const auto sorted = sorted_copy(flows);
    extract_direction(sorted, Direction::Inbound, config, out);
    extract_direction(sorted, Direction::Outbound, config, out);

    const HourWindow window = hour_window(sorted);
    out.values["DSIP"] = median(hourly_unique(sorted, window, Direction::Outbound, [](const FlowRecord& f) {
        return f.peer_ip;
    }));
    out.values["DSPR"] = median(hourly_unique(sorted, window, Direction::Outbound, [](const FlowRecord& f) {
        return std::to_string(f.peer_port);
    }));
    out.values["SRIP"] = median(hourly_unique(sorted, window, Direction::Inbound, [](const FlowRecord& f) {
        return f.peer_ip;
    }));

    double out_packets = 0.0;
    double well_known = 0.0;
    for (const auto& f : sorted) {
        if (f.direction != Direction::Outbound) continue;
        out_packets += static_cast<double>(f.packets);
        if (f.peer_port <= config.well_known_max_port) well_known += static_cast<double>(f.packets);
    }
    if (out_packets == 0.0) {
        out.missing["WLPR"] = "no outbound flows";
    } else {
        out.values["WLPR"] = well_known / out_packets >= config.wlpr_threshold ? 1.0 : 0.0;
    }

    if (window.count < config.ccom_min_hours) {
        out.missing["CCOM"] = "capture spans " + std::to_string(window.count) + " hour(s); at least " +
                              std::to_string(config.ccom_min_hours) + " required";
    } else {
        std::vector<double> hourly(window.count, 0.0);
        for (const auto& f : sorted) hourly[window.index(f.start_time)] += static_cast<double>(f.packets);
        double night_sum = 0.0;
        std::size_t night_hours = 0;
        double day_max = 0.0;
        for (std::size_t h = 0; h < window.count; ++h) {
            const auto local = window.first + std::chrono::hours(h) + std::chrono::minutes(config.utc_offset_minutes);
            const auto since_midnight = local - std::chrono::floor<std::chrono::days>(local);
            const auto hour_of_day = std::chrono::duration_cast<std::chrono::hours>(since_midnight).count();
            if (hour_of_day >= config.night_start_hour && hour_of_day < config.night_end_hour) {
                night_sum += hourly[h];
                ++night_hours;
            } else {
                day_max = std::max(day_max, hourly[h]);
            }
        }
        const double night_mean = night_hours ? night_sum / static_cast<double>(night_hours) : 0.0;
        if (night_hours == 0) {
            out.missing["CCOM"] = "capture contains no night hours";
        } else if (day_max == 0.0 && night_mean == 0.0) {
            out.missing["CCOM"] = "no packets in the capture window";
        } else {
            out.values["CCOM"] = day_max == 0.0 ? 1.0 : std::clamp(night_mean / day_max, 0.0, 1.0);
        }
    }
    return out;
}

std::string_view to_string(Kpi kpi) {
    switch (kpi) {
        case Kpi::FlowIncomingPackets: return "flow_incoming_packets";
        case Kpi::HourlyFlows: return "hourly_flows";
        case Kpi::HourlyUniqueDstIps: return "hourly_unique_dst_ips";
        case Kpi::HourlyUniqueDstPorts: return "hourly_unique_dst_ports";
    }
    return "";
}

std::vector<KpiSeries> compute_kpis(const std::vector<FlowRecord>& flows, const std::string& device) {
    std::vector<KpiSeries> out;
    for (const Kpi k : kAllKpis) out.push_back(KpiSeries{k, {}, device});
    if (flows.empty()) return out;
    const auto sorted = sorted_copy(flows);
    const HourWindow window = hour_window(sorted);

    std::vector<double> hourly_flows(window.count, 0.0);
    for (const auto& f : sorted) {
        if (f.direction == Direction::Inbound) {
            out[0].values.push_back(static_cast<double>(f.packets));
        } else {
            hourly_flows[window.index(f.start_time)] += 1.0;
        }
    }
    out[1].values = std::move(hourly_flows);
    out[2].values = hourly_unique(sorted, window, Direction::Outbound, [](const FlowRecord& f) { return f.peer_ip; });
    out[3].values = hourly_unique(sorted, window, Direction::Outbound,
                                  [](const FlowRecord& f) { return std::to_string(f.peer_port); });
    return out;
}

std::map<std::string, double> DeviceProfile::values() const {
    auto out = static_values;
    out.insert(dynamic_values.begin(), dynamic_values.end());
    return out;
}

namespace {

StaticProfile static_from_json(const nlohmann::ordered_json& j, const Taxonomy& taxonomy, const std::string& where) {
    StaticProfile p;
    try {
        p.model_id = j.at("model_id").get<std::string>();
        p.device_type = j.value("type", "");
        for (const auto& [code, v] : j.at("values").items()) {
            const FeatureDef* f = taxonomy.find_feature(code);
            if (!f) throw InputError(where + ": unknown feature code '" + code + "'");
            if (f->source == Source::Dynamic) {
                throw InputError(where + ": conflict: feature '" + code +
                                 "' is extracted from traffic and cannot be supplied statically");
            }
            const double value = v.get<double>();
            if (!(value >= f->x_min)) throw InputError(where + ": value of '" + code + "' is below its minimum");
            p.values[code] = value;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InputError(where + ": " + e.what());
    }
    return p;
}

}  // namespace

StaticProfile static_profile_from_json(const std::string& text, const Taxonomy& taxonomy) {
    try {
        return static_from_json(nlohmann::ordered_json::parse(text), taxonomy, "static profile");
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("static profile: ") + e.what());
    }
}

StaticProfile load_static_profile(const std::filesystem::path& path, const Taxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open static profile " + path.string());
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return static_from_json(j, taxonomy, path.string());
}

DeviceProfile build_profile(const StaticProfile& declared, const FeatureExtraction& extracted,
                            const Taxonomy& taxonomy, const std::vector<FlowRecord>& flows) {
    DeviceProfile p;
    p.model_id = declared.model_id;
    p.device_type = declared.device_type;
    p.taxonomy_version = taxonomy.version();
    p.static_values = declared.values;
    for (const auto& [code, v] : extracted.values) {
        if (p.static_values.count(code)) {
            throw InputError("conflict: feature '" + code + "' supplied both statically and from traffic");
        }
        p.dynamic_values[code] = v;
    }
    for (const auto* f : taxonomy.features()) {
        if (p.static_values.count(f->code) || p.dynamic_values.count(f->code)) continue;
        auto it = extracted.missing.find(f->code);
        if (it != extracted.missing.end()) {
            p.missing[f->code] = it->second;
        } else if (f->source == Source::Dynamic) {
            p.missing[f->code] = "not extracted";
        } else {
            p.missing[f->code] = "not supplied by the static profile";
        }
    }
    if (!flows.empty()) {
        const auto [lo, hi] = std::minmax_element(flows.begin(), flows.end(), [](const auto& a, const auto& b) {
            return a.start_time < b.start_time;
        });
        p.capture_window = std::make_pair(lo->start_time, hi->start_time);
    }
    return p;
}

void save_profile(const DeviceProfile& p, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "dscore-profile";
    j["tool_version"] = kToolVersion;
    j["taxonomy_version"] = p.taxonomy_version;
    j["model_id"] = p.model_id;
    j["type"] = p.device_type;
    j["static_values"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : p.static_values) j["static_values"][k] = v;
    j["dynamic_values"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : p.dynamic_values) j["dynamic_values"][k] = v;
    j["missing"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : p.missing) j["missing"][k] = v;
    if (p.capture_window) {
        j["capture_window"] = {{"start", format_iso8601(p.capture_window->first)},
                               {"end", format_iso8601(p.capture_window->second)}};
    } else {
        j["capture_window"] = nullptr;
    }
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

DeviceProfile load_profile(const std::filesystem::path& path, const Taxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open profile " + path.string());
    try {
        nlohmann::ordered_json j;
        in >> j;
        if (j.value("format", "") != "dscore-profile") throw InputError(path.string() + ": not a device profile");
        DeviceProfile p;
        p.taxonomy_version = j.at("taxonomy_version").get<std::string>();
        if (p.taxonomy_version != taxonomy.version()) {
            throw InputError(path.string() + ": taxonomy version mismatch (profile " + p.taxonomy_version +
                             ", taxonomy " + taxonomy.version() + ")");
        }
        p.model_id = j.at("model_id").get<std::string>();
        p.device_type = j.value("type", "");
        const auto read_values = [&](const char* key, std::map<std::string, double>& dst) {
            for (const auto& [code, v] : j.at(key).items()) {
                const FeatureDef* f = taxonomy.find_feature(code);
                if (!f) throw InputError(path.string() + ": unknown feature code '" + code + "'");
                const double value = v.get<double>();
                if (!(value >= f->x_min)) {
                    throw InputError(path.string() + ": value of '" + code + "' is below its minimum");
                }
                dst[code] = value;
            }
        };
        read_values("static_values", p.static_values);
        read_values("dynamic_values", p.dynamic_values);
        const auto missing = j.value("missing", nlohmann::ordered_json::object());
        for (const auto& [code, reason] : missing.items()) {
            p.missing[code] = reason.get<std::string>();
        }
        if (j.contains("capture_window") && !j["capture_window"].is_null()) {
            p.capture_window = std::make_pair(parse_iso8601(j["capture_window"].at("start").get<std::string>()),
                                              parse_iso8601(j["capture_window"].at("end").get<std::string>()));
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

}  // namespace dscore::traffic
