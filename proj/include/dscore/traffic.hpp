#pragma once

#include "dscore/taxonomy.hpp"
#include "dscore/util.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace dscore::traffic {

enum class Direction { Inbound, Outbound };
enum class Protocol { TCP, UDP, Other };

/// One directional flow, oriented relative to the monitored device.
struct FlowRecord {
    Timestamp start_time{};
    double duration = 0.0;  // seconds
    Direction direction = Direction::Outbound;
    std::string peer_ip;
    std::uint16_t device_port = 0;
    std::uint16_t peer_port = 0;
    Protocol protocol = Protocol::Other;
    std::uint64_t packets = 1;
    std::uint64_t bytes = 1;

    bool operator==(const FlowRecord&) const = default;
};

struct FlowLoad {
    std::vector<FlowRecord> flows;
    std::size_t skipped = 0;  // records where neither endpoint is the device
};

/// Reads the flow CSV (header: start_time,duration_s,src_ip,dst_ip,src_port,dst_port,
/// protocol,packets,bytes). Direction is outbound iff src_ip == device_ip.
FlowLoad load_flows(std::istream& in, const std::string& device_ip);
FlowLoad load_flows(const std::filesystem::path& path, const std::string& device_ip);

struct ExtractionConfig {
    int night_start_hour = 0;  // device-local, inclusive
    int night_end_hour = 6;    // device-local, exclusive
    int utc_offset_minutes = 0;
    double wlpr_threshold = 0.99;
    std::set<std::uint16_t> encrypted_ports = {443, 8443};
    std::uint16_t well_known_max_port = 1024;
    std::size_t ccom_min_hours = 24;
};

/// Extracted values plus a reason for every dynamic feature that could not be computed.
/// A missing feature is absent from `values`; it is never reported as 0.
struct FeatureExtraction {
    std::map<std::string, double> values;
    std::map<std::string, std::string> missing;
};

/// Computes the 18 traffic features plus CCOM. Sessions are flows one-to-one.
FeatureExtraction extract_dynamic_features(const std::vector<FlowRecord>& flows, const ExtractionConfig& config = {});

/// Names of the features extract_dynamic_features may produce, in taxonomy order.
const std::vector<std::string>& extracted_feature_codes();

enum class Kpi { FlowIncomingPackets, HourlyFlows, HourlyUniqueDstIps, HourlyUniqueDstPorts };

std::string_view to_string(Kpi kpi);
inline constexpr Kpi kAllKpis[] = {Kpi::FlowIncomingPackets, Kpi::HourlyFlows, Kpi::HourlyUniqueDstIps,
                                   Kpi::HourlyUniqueDstPorts};

struct KpiSeries {
    Kpi kpi = Kpi::HourlyFlows;
    std::vector<double> values;
    std::string device;
};

/// The four predictability KPIs, in kAllKpis order. Hourly series cover every
/// wall-clock hour between the first and last flow start; empty hours count 0.
/// flow_incoming_packets is empty when the device received no flows.
std::vector<KpiSeries> compute_kpis(const std::vector<FlowRecord>& flows, const std::string& device = "");

/// One IoT model's raw feature values.
struct DeviceProfile {
    std::string model_id;
    std::string device_type;  // grouping for maximin comparisons; may be empty
    std::string taxonomy_version;
    std::map<std::string, double> static_values;
    std::map<std::string, double> dynamic_values;
    std::map<std::string, std::string> missing;  // feature code -> reason
    std::optional<std::pair<Timestamp, Timestamp>> capture_window;

    /// Static and dynamic values merged.
    std::map<std::string, double> values() const;

    bool operator==(const DeviceProfile&) const = default;
};

/// Static/declared values supplied by an operator (spec sheet, scans, expected usage).
struct StaticProfile {
    std::string model_id;
    std::string device_type;
    std::map<std::string, double> values;
};

/// Reads {"model_id", "type", "values": {code: number}}. Rejects unknown codes,
/// values below x_min, and dynamic features (those come from traffic).
StaticProfile load_static_profile(const std::filesystem::path& path, const Taxonomy& taxonomy);
StaticProfile static_profile_from_json(const std::string& text, const Taxonomy& taxonomy);

/// Merges operator values with extracted ones and lists every feature still missing.
DeviceProfile build_profile(const StaticProfile& declared, const FeatureExtraction& extracted,
                            const Taxonomy& taxonomy, const std::vector<FlowRecord>& flows = {});

void save_profile(const DeviceProfile& profile, const std::filesystem::path& path);
DeviceProfile load_profile(const std::filesystem::path& path, const Taxonomy& taxonomy);

}  // namespace dscore::traffic
