#include "dscore/taxonomy.hpp"

#include "dscore/error.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace dscore {

namespace {

constexpr std::pair<Unit, std::string_view> kUnitNames[] = {
    {Unit::Count, "count"},     {Unit::CountPerHour, "count/hour"}, {Unit::MHz, "MHz"},
    {Unit::MB, "MB"},           {Unit::Seconds, "seconds"},         {Unit::Bytes, "bytes"},
    {Unit::Percent, "percent"}, {Unit::Binary, "binary"},
};

constexpr std::pair<Source, std::string_view> kSourceNames[] = {
    {Source::Static, "static"},
    {Source::Dynamic, "dynamic"},
    {Source::Declared, "declared"},
};

}  // namespace

std::string_view to_string(Unit unit) {
    for (const auto& [u, name] : kUnitNames) {
        if (u == unit) return name;
    }
    return "count";
}

std::string_view to_string(Source source) {
    for (const auto& [s, name] : kSourceNames) {
        if (s == source) return name;
    }
    return "static";
}

Unit parse_unit(std::string_view text) {
    for (const auto& [u, name] : kUnitNames) {
        if (name == text) return u;
    }
    throw InputError("unknown unit '" + std::string(text) + "'");
}

Source parse_source(std::string_view text) {
    for (const auto& [s, name] : kSourceNames) {
        if (name == text) return s;
    }
    throw InputError("unknown feature source '" + std::string(text) + "'");
}

std::size_t pairwise_count(std::size_t n) { return n * (n - (n > 0 ? 1 : 0)) / 2; }

Taxonomy::Taxonomy(std::string version, std::vector<Category> categories)
    : version_(std::move(version)), categories_(std::move(categories)) {}

std::size_t Taxonomy::count_features() const {
    std::size_t n = 0;
    for (const auto& c : categories_) {
        for (const auto& s : c.sub_categories) n += s.features.size();
    }
    return n;
}

std::vector<const SubCategory*> Taxonomy::subcategories() const {
    std::vector<const SubCategory*> out;
    for (const auto& c : categories_) {
        for (const auto& s : c.sub_categories) out.push_back(&s);
    }
    return out;
}

std::vector<const FeatureDef*> Taxonomy::features() const {
    std::vector<const FeatureDef*> out;
    for (const auto& c : categories_) {
        for (const auto& s : c.sub_categories) {
            for (const auto& f : s.features) out.push_back(&f);
        }
    }
    return out;
}

std::vector<std::string> Taxonomy::subcategory_codes() const {
    std::vector<std::string> out;
    for (const auto* s : subcategories()) out.push_back(s->code);
    return out;
}

std::vector<std::string> Taxonomy::feature_codes() const {
    std::vector<std::string> out;
    for (const auto* f : features()) out.push_back(f->code);
    return out;
}

const FeatureDef* Taxonomy::find_feature(std::string_view code) const {
    for (const auto* f : features()) {
        if (f->code == code) return f;
    }
    return nullptr;
}

const FeatureDef& Taxonomy::feature(std::string_view code) const {
    if (const auto* f = find_feature(code)) return *f;
    throw InputError("unknown feature code '" + std::string(code) + "'");
}

const SubCategory* Taxonomy::find_subcategory(std::string_view code) const {
    for (const auto* s : subcategories()) {
        if (s->code == code) return s;
    }
    return nullptr;
}

const Category* Taxonomy::find_category(std::string_view code) const {
    for (const auto& c : categories_) {
        if (c.code == code) return &c;
    }
    return nullptr;
}

const Category* Taxonomy::category_of(std::string_view subcategory_code) const {
    for (const auto& c : categories_) {
        for (const auto& s : c.sub_categories) {
            if (s.code == subcategory_code) return &c;
        }
    }
    return nullptr;
}

const SubCategory* Taxonomy::subcategory_of(std::string_view feature_code) const {
    for (const auto* s : subcategories()) {
        for (const auto& f : s->features) {
            if (f.code == feature_code) return s;
        }
    }
    return nullptr;
}

std::optional<std::size_t> Taxonomy::subcategory_index(std::string_view code) const {
    const auto subs = subcategories();
    for (std::size_t i = 0; i < subs.size(); ++i) {
        if (subs[i]->code == code) return i;
    }
    return std::nullopt;
}

std::optional<std::size_t> Taxonomy::feature_index(std::string_view code) const {
    const auto feats = features();
    for (std::size_t i = 0; i < feats.size(); ++i) {
        if (feats[i]->code == code) return i;
    }
    return std::nullopt;
}

PairCounts Taxonomy::pair_counts() const {
    PairCounts counts;
    counts.categories = pairwise_count(categories_.size());
    std::size_t n_sub = 0;
    for (const auto& c : categories_) {
        counts.subcategories_within_categories += pairwise_count(c.sub_categories.size());
        n_sub += c.sub_categories.size();
        for (const auto& s : c.sub_categories) counts.features_total += pairwise_count(s.features.size());
    }
    counts.subcategories_global = pairwise_count(n_sub);
    return counts;
}

namespace {

FeatureDef feat(std::string code, std::string name, Unit unit, Source source, double x_max, std::string note) {
    return FeatureDef{std::move(code), std::move(name), unit, source, 0.0, x_max, std::move(note)};
}

constexpr const char* kTable = "reference exemplar of its range class";

}  // namespace

Taxonomy default_taxonomy() {
    using U = Unit;
    using S = Source;
    std::vector<Category> cats;

    cats.push_back(Category{
        "HW",
        "Hardware",
        {
            SubCategory{"SNA",
                        "Sensors & actuators",
                        {
                            feat("NSNS", "Number of sensors", U::Count, S::Static, 10, kTable),
                            feat("NACT", "Number of actuators", U::Count, S::Static, 10,
                                 "consumer devices carry well under ten actuators"),
                        }},
            SubCategory{"RSR",
                        "Computing resources",
                        {
                            feat("CPUS", "CPU speed", U::MHz, S::Static, 1000, kTable),
                            feat("MEMS", "Memory size", U::MB, S::Static, 1000,
                                 "embedded RAM is typically below 1 GB"),
                            feat("BATT", "Powered by battery", U::Binary, S::Static, 1, kTable),
                        }},
        }});

    cats.push_back(Category{
        "SB",
        "Software & behavior",
        {
            SubCategory{"FNC",
                        "Device functionality",
                        {
                            feat("STOS", "Runs a standard operating system", U::Binary, S::Declared, 1,
                                 "binary flag; declared from an OS fingerprint scan"),
                            feat("ADAP", "Supports the addition of applications", U::Binary, S::Static, 1,
                                 "binary flag"),
                            feat("CCOM", "Continuously communicates (not event driven)", U::Percent, S::Dynamic, 1,
                                 "ratio clamped to [0,1]"),
                        }},
            SubCategory{"INT",
                        "User interaction",
                        {
                            feat("NUSR", "Number of users who interact with the device", U::Count, S::Declared, 10,
                                 "households and small offices rarely exceed ten users"),
                            feat("FINT", "Frequency of interactions with the device", U::CountPerHour, S::Declared,
                                 10, kTable),
                            feat("DINT", "Duration of an interaction with the device", U::Seconds, S::Declared,
                                 1000, "no reference range; largest class chosen, operator review advised"),
                            feat("NUIS", "Number of supported UIs (direct, mobile, web, etc.)", U::Count,
                                 S::Static, 10, "a handful of interface kinds exist"),
                            feat("SRNG", "Supports short-range communication (Bluetooth, Zigbee)", U::Binary,
                                 S::Static, 1, "binary flag"),
                        }},
        }});

    cats.push_back(Category{
        "NT",
        "Network",
        {
            SubCategory{"INB",
                        "Inbound network traffic",
                        {
                            feat("IATI", "Inter-arrival time of inbound sessions", U::Seconds, S::Dynamic, 1000,
                                 kTable),
                            feat("PCKI", "Number of packets per inbound session", U::Count, S::Dynamic, 100, kTable),
                            feat("PCSI", "Inbound packet size", U::Bytes, S::Dynamic, 1000,
                                 "bytes per session; sessions of a few packets stay below 1000"),
                            feat("PCVI", "Variability of inbound packet size", U::Bytes, S::Dynamic, 1000,
                                 "standard deviation bounded by the 1500-byte MTU"),
                            feat("ENCI", "% of inbound encrypted traffic", U::Percent, S::Dynamic, 1, kTable),
                            feat("UDPI", "% of inbound UDP traffic", U::Percent, S::Dynamic, 1, "ratio"),
                        }},
            SubCategory{"OUT",
                        "Outbound network traffic",
                        {
                            feat("IATO", "Inter-arrival time of outbound sessions", U::Seconds, S::Dynamic, 100,
                                 kTable),
                            feat("PCKO", "Number of packets per outbound session", U::Count, S::Dynamic, 100,
                                 "mirrors PCKI"),
                            feat("PCSO", "Outbound packet size", U::Bytes, S::Dynamic, 1000, "mirrors PCSI"),
                            feat("PCVO", "Variability of outbound packet size", U::Bytes, S::Dynamic, 1000,
                                 "mirrors PCVI"),
                            feat("ENCO", "% of outbound encrypted traffic", U::Percent, S::Dynamic, 1, "ratio"),
                            feat("UDPO", "% of outbound UDP traffic", U::Percent, S::Dynamic, 1, "ratio"),
                        }},
            SubCategory{"SRD",
                        "Communication sources & destinations",
                        {
                            feat("DSIP", "Number of unique destination IP addresses", U::Count, S::Dynamic, 100,
                                 "hourly medians of IoT devices stay in the tens"),
                            feat("DSPR", "Number of unique destination port numbers", U::Count, S::Dynamic, 100,
                                 "hourly medians of IoT devices stay in the tens"),
                            feat("WLPR", "Communicates only with well-known ports", U::Binary, S::Dynamic, 1,
                                 "binary flag"),
                            feat("SRIP", "Number of unique source IP addresses", U::Count, S::Dynamic, 100,
                                 "hourly medians of IoT devices stay in the tens"),
                            feat("OPPR", "Number of open (listening) ports on the device", U::Count, S::Declared,
                                 10, "declared from a port scan; IoT devices expose few services"),
                        }},
        }});

    return Taxonomy("1.0", std::move(cats));
}

std::vector<std::string> validate(const Taxonomy& taxonomy) {
    std::vector<std::string> violations;
    std::set<std::string> cat_codes;
    std::set<std::string> sub_codes;
    std::set<std::string> feat_codes;

    if (taxonomy.categories().empty()) violations.push_back("taxonomy has no categories");
    for (const auto& c : taxonomy.categories()) {
        if (!cat_codes.insert(c.code).second) violations.push_back("duplicate category code '" + c.code + "'");
        if (c.sub_categories.empty()) violations.push_back("category '" + c.code + "' has no sub-categories");
        for (const auto& s : c.sub_categories) {
            if (!sub_codes.insert(s.code).second) {
                violations.push_back("duplicate sub-category code '" + s.code + "'");
            }
            if (s.features.empty()) violations.push_back("sub-category '" + s.code + "' has no features");
            for (const auto& f : s.features) {
                if (!feat_codes.insert(f.code).second) {
                    violations.push_back("duplicate feature code '" + f.code + "'");
                }
                if (!(f.x_min < f.x_max)) {
                    violations.push_back("feature '" + f.code + "' has x_min >= x_max");
                }
                if ((f.unit == Unit::Percent || f.unit == Unit::Binary) && f.x_max != 1.0) {
                    violations.push_back("feature '" + f.code + "' is a ratio/flag but x_max != 1");
                }
            }
        }
    }
    return violations;
}

void to_json(nlohmann::ordered_json& j, const Taxonomy& taxonomy) {
    j = nlohmann::ordered_json::object();
    j["format"] = "dscore-taxonomy";
    j["version"] = taxonomy.version();
    auto& cats = j["categories"] = nlohmann::ordered_json::array();
    for (const auto& c : taxonomy.categories()) {
        nlohmann::ordered_json jc;
        jc["code"] = c.code;
        jc["name"] = c.name;
        auto& subs = jc["sub_categories"] = nlohmann::ordered_json::array();
        for (const auto& s : c.sub_categories) {
            nlohmann::ordered_json js;
            js["code"] = s.code;
            js["name"] = s.name;
            auto& feats = js["features"] = nlohmann::ordered_json::array();
            for (const auto& f : s.features) {
                nlohmann::ordered_json jf;
                jf["code"] = f.code;
                jf["name"] = f.name;
                jf["unit"] = to_string(f.unit);
                jf["source"] = to_string(f.source);
                jf["x_min"] = f.x_min;
                jf["x_max"] = f.x_max;
                jf["range_note"] = f.range_note;
                feats.push_back(std::move(jf));
            }
            subs.push_back(std::move(js));
        }
        cats.push_back(std::move(jc));
    }
}

Taxonomy taxonomy_from_json(const nlohmann::ordered_json& j) {
    try {
        std::vector<Category> cats;
        for (const auto& jc : j.at("categories")) {
            Category c{jc.at("code").get<std::string>(), jc.value("name", ""), {}};
            for (const auto& js : jc.at("sub_categories")) {
                SubCategory s{js.at("code").get<std::string>(), js.value("name", ""), {}};
                for (const auto& jf : js.at("features")) {
                    FeatureDef f;
                    f.code = jf.at("code").get<std::string>();
                    f.name = jf.value("name", "");
                    f.unit = parse_unit(jf.at("unit").get<std::string>());
                    f.source = parse_source(jf.at("source").get<std::string>());
                    f.x_min = jf.value("x_min", 0.0);
                    f.x_max = jf.at("x_max").get<double>();
                    f.range_note = jf.value("range_note", "");
                    s.features.push_back(std::move(f));
                }
                c.sub_categories.push_back(std::move(s));
            }
            cats.push_back(std::move(c));
        }
        return Taxonomy(j.at("version").get<std::string>(), std::move(cats));
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("taxonomy: ") + e.what());
    }
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open taxonomy file " + path.string());
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    Taxonomy taxonomy = taxonomy_from_json(j);
    const auto violations = validate(taxonomy);
    if (!violations.empty()) {
        std::string msg = path.string() + ": invalid taxonomy";
        for (const auto& v : violations) msg += "\n  " + v;
        throw InputError(msg);
    }
    return taxonomy;
}

void save_taxonomy(const Taxonomy& taxonomy, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    nlohmann::ordered_json j;
    to_json(j, taxonomy);
    out << j.dump(2) << '\n';
}

}  // namespace dscore
