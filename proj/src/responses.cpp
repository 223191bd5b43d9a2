#include "dscore/responses.hpp"

#include "dscore/error.hpp"
#include "dscore/util.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace dscore {

namespace {

const std::vector<std::string> kHeader = {"response_id", "scenario", "record_kind", "left_code", "right_code", "value"};

enum class RecordKind { KeepCategory, KeepSubcategory, JudgmentSubcat, JudgmentFeature, Demographic };

std::optional<RecordKind> parse_kind(const std::string& s) {
    if (s == "keep_category") return RecordKind::KeepCategory;
    if (s == "keep_subcategory") return RecordKind::KeepSubcategory;
    if (s == "judgment_subcat") return RecordKind::JudgmentSubcat;
    if (s == "judgment_feature") return RecordKind::JudgmentFeature;
    if (s == "demographic") return RecordKind::Demographic;
    return std::nullopt;
}

std::string pair_name(const std::string& a, const std::string& b) { return "(" + a + ", " + b + ")"; }

int parse_judgment(const std::string& text, const std::string& a, const std::string& b, std::size_t line) {
    int value = 0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (!text.empty() && text.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc{} || ptr != last) {
        throw ParseError("field 'value': judgment for pair " + pair_name(a, b) + " is not an integer: '" + text + "'",
                         line);
    }
    if (value < -kMaxJudgment || value > kMaxJudgment) {
        throw ParseError("judgment " + std::to_string(value) + " for pair " + pair_name(a, b) +
                             " is out of range [-5, +5]",
                         line);
    }
    return value;
}

/// Orders a pair by index; flips the sign when the file listed it reversed.
std::pair<ElementPair, int> canonical(std::string a, std::string b, int value, std::size_t ia, std::size_t ib) {
    if (ia > ib) return {{std::move(b), std::move(a)}, -value};
    return {{std::move(a), std::move(b)}, value};
}

}  // namespace

bool ExpertResponse::partial() const {
    auto it = demographics.find("status");
    return it != demographics.end() && it->second == "partial";
}

std::vector<ExpertResponse> parse_responses(std::istream& in, const Taxonomy& taxonomy,
                                            const std::optional<std::vector<std::string>>& scenarios) {
    std::vector<ExpertResponse> out;
    std::map<std::string, std::size_t> index;

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            if (fields != kHeader) {
                throw ParseError("header must be 'response_id,scenario,record_kind,left_code,right_code,value'",
                                 line_no);
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != kHeader.size()) {
            throw ParseError("expected 6 fields, found " + std::to_string(fields.size()), line_no);
        }
        const auto& id = fields[0];
        const auto& scenario = fields[1];
        const auto& left = fields[3];
        const auto& right = fields[4];
        const auto& value = fields[5];
        if (id.empty()) throw ParseError("field 'response_id' is empty", line_no);
        if (scenario.empty()) throw ParseError("field 'scenario' is empty", line_no);
        if (scenarios && std::find(scenarios->begin(), scenarios->end(), scenario) == scenarios->end()) {
            throw ParseError("field 'scenario': unknown scenario '" + scenario + "'", line_no);
        }
        const auto kind = parse_kind(fields[2]);
        if (!kind) throw ParseError("field 'record_kind': unknown kind '" + fields[2] + "'", line_no);

        auto [it, inserted] = index.try_emplace(id, out.size());
        if (inserted) {
            out.push_back(ExpertResponse{});
            out.back().response_id = id;
            out.back().scenario = scenario;
        }
        ExpertResponse& r = out[it->second];
        if (r.scenario != scenario) {
            throw ParseError("field 'scenario': response '" + id + "' already declared scenario '" + r.scenario + "'",
                             line_no);
        }

        switch (*kind) {
            case RecordKind::KeepCategory:
                if (!taxonomy.find_category(left)) {
                    throw ParseError("field 'left_code': unknown category '" + left + "'", line_no);
                }
                if (value != "1") throw ParseError("field 'value': keep records carry value 1", line_no);
                r.kept_categories.insert(left);
                break;
            case RecordKind::KeepSubcategory:
                if (!taxonomy.find_subcategory(left)) {
                    throw ParseError("field 'left_code': unknown sub-category '" + left + "'", line_no);
                }
                if (value != "1") throw ParseError("field 'value': keep records carry value 1", line_no);
                r.kept_subcategories.insert(left);
                break;
            case RecordKind::JudgmentSubcat: {
                const auto ia = taxonomy.subcategory_index(left);
                const auto ib = taxonomy.subcategory_index(right);
                if (!ia) throw ParseError("field 'left_code': unknown sub-category '" + left + "'", line_no);
                if (!ib) throw ParseError("field 'right_code': unknown sub-category '" + right + "'", line_no);
                if (*ia == *ib) throw ParseError("field 'right_code': pair compares '" + left + "' to itself", line_no);
                auto [key, v] = canonical(left, right, parse_judgment(value, left, right, line_no), *ia, *ib);
                if (!r.subcategory_judgments.emplace(key, v).second) {
                    throw ParseError("duplicate judgment for pair " + pair_name(key.first, key.second), line_no);
                }
                break;
            }
            case RecordKind::JudgmentFeature: {
                const auto ia = taxonomy.feature_index(left);
                const auto ib = taxonomy.feature_index(right);
                if (!ia) throw ParseError("field 'left_code': unknown feature '" + left + "'", line_no);
                if (!ib) throw ParseError("field 'right_code': unknown feature '" + right + "'", line_no);
                if (*ia == *ib) throw ParseError("field 'right_code': pair compares '" + left + "' to itself", line_no);
                if (taxonomy.subcategory_of(left) != taxonomy.subcategory_of(right)) {
                    throw ParseError("field 'right_code': features " + pair_name(left, right) +
                                         " belong to different sub-categories",
                                     line_no);
                }
                auto [key, v] = canonical(left, right, parse_judgment(value, left, right, line_no), *ia, *ib);
                if (!r.feature_judgments.emplace(key, v).second) {
                    throw ParseError("duplicate judgment for pair " + pair_name(key.first, key.second), line_no);
                }
                break;
            }
            case RecordKind::Demographic:
                if (left.empty()) throw ParseError("field 'left_code': demographic key is empty", line_no);
                r.demographics[left] = value;
                break;
        }
    }
    if (!header_seen && line_no > 0) throw ParseError("missing header row", line_no);

    for (const auto& r : out) {
        try {
            check_response(r, taxonomy);
        } catch (const InputError& e) {
            throw InputError(std::string("response '") + r.response_id + "': " + e.what());
        }
    }
    return out;
}

std::vector<ExpertResponse> load_responses(const std::filesystem::path& path, const Taxonomy& taxonomy,
                                           const std::optional<std::vector<std::string>>& scenarios) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open response file " + path.string());
    try {
        return parse_responses(in, taxonomy, scenarios);
    } catch (const ParseError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

void write_responses(std::ostream& out, const std::vector<ExpertResponse>& responses, const Taxonomy& taxonomy) {
    out << "response_id,scenario,record_kind,left_code,right_code,value\n";
    for (const auto& r : responses) {
        const auto row = [&](const char* kind, const std::string& l, const std::string& rc, const std::string& v) {
            out << r.response_id << ',' << r.scenario << ',' << kind << ',' << l << ',' << rc << ',' << v << '\n';
        };
        for (const auto& [k, v] : r.demographics) row("demographic", k, "", v);
        for (const auto& c : taxonomy.categories()) {
            if (r.kept_categories.count(c.code)) row("keep_category", c.code, "", "1");
        }
        for (const auto* s : taxonomy.subcategories()) {
            if (r.kept_subcategories.count(s->code)) row("keep_subcategory", s->code, "", "1");
        }
        const auto subs = taxonomy.subcategory_codes();
        for (std::size_t i = 0; i < subs.size(); ++i) {
            for (std::size_t j = i + 1; j < subs.size(); ++j) {
                auto it = r.subcategory_judgments.find({subs[i], subs[j]});
                if (it != r.subcategory_judgments.end()) {
                    row("judgment_subcat", subs[i], subs[j], std::to_string(it->second));
                }
            }
        }
        for (const auto* s : taxonomy.subcategories()) {
            for (std::size_t i = 0; i < s->features.size(); ++i) {
                for (std::size_t j = i + 1; j < s->features.size(); ++j) {
                    auto it = r.feature_judgments.find({s->features[i].code, s->features[j].code});
                    if (it != r.feature_judgments.end()) {
                        row("judgment_feature", s->features[i].code, s->features[j].code, std::to_string(it->second));
                    }
                }
            }
        }
    }
}

void check_response(const ExpertResponse& r, const Taxonomy& taxonomy) {
    for (const auto& c : r.kept_categories) {
        if (!taxonomy.find_category(c)) throw InputError("unknown kept category '" + c + "'");
    }
    for (const auto& s : r.kept_subcategories) {
        const Category* owner = taxonomy.category_of(s);
        if (!owner) throw InputError("unknown kept sub-category '" + s + "'");
        if (!r.kept_categories.count(owner->code)) {
            throw InputError("sub-category '" + s + "' kept but its category '" + owner->code + "' was dropped");
        }
    }
    const auto check_map = [&](const JudgmentMap& m, bool features) {
        for (const auto& [pair, v] : m) {
            const auto ia = features ? taxonomy.feature_index(pair.first) : taxonomy.subcategory_index(pair.first);
            const auto ib = features ? taxonomy.feature_index(pair.second) : taxonomy.subcategory_index(pair.second);
            if (!ia || !ib) throw InputError("pair " + pair_name(pair.first, pair.second) + " is not in the taxonomy");
            if (*ia >= *ib) {
                throw InputError("pair " + pair_name(pair.first, pair.second) + " is not in canonical order");
            }
            if (features && taxonomy.subcategory_of(pair.first) != taxonomy.subcategory_of(pair.second)) {
                throw InputError("pair " + pair_name(pair.first, pair.second) + " spans sub-categories");
            }
            if (v < -kMaxJudgment || v > kMaxJudgment) {
                throw InputError("judgment for pair " + pair_name(pair.first, pair.second) + " is out of range");
            }
        }
    };
    check_map(r.subcategory_judgments, false);
    check_map(r.feature_judgments, true);
}

namespace {

/// Fill-in value for a missing pair given which sides were kept.
Judgment fill_value(bool left_kept, bool right_kept) {
    if (left_kept && !right_kept) return -kMaxJudgment;
    if (!left_kept && right_kept) return kMaxJudgment;
    return 0;
}

}  // namespace

CompletedResponse complete(const ExpertResponse& response, const Taxonomy& taxonomy) {
    CompletedResponse out{response, 0, {}};
    ExpertResponse& r = out.response;
    const auto subs = taxonomy.subcategories();
    const auto kept = [&](const std::string& sub) { return r.kept_subcategories.count(sub) > 0; };

    std::size_t skipped_sub = 0;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        for (std::size_t j = i + 1; j < subs.size(); ++j) {
            ElementPair key{subs[i]->code, subs[j]->code};
            if (r.subcategory_judgments.count(key)) continue;
            const bool lk = kept(key.first);
            const bool rk = kept(key.second);
            if (lk && rk) ++skipped_sub;
            r.subcategory_judgments.emplace(std::move(key), fill_value(lk, rk));
            ++out.filled_pairs;
        }
    }
    if (skipped_sub > 0) {
        out.quality_notes.push_back(std::to_string(skipped_sub) +
                                    " sub-category pair(s) between kept sub-categories left unjudged; set to 0");
    }

    for (const auto* s : subs) {
        std::size_t skipped = 0;
        const bool sub_kept = kept(s->code);
        for (std::size_t i = 0; i < s->features.size(); ++i) {
            for (std::size_t j = i + 1; j < s->features.size(); ++j) {
                ElementPair key{s->features[i].code, s->features[j].code};
                if (r.feature_judgments.count(key)) continue;
                if (sub_kept) ++skipped;
                r.feature_judgments.emplace(std::move(key), 0);
                ++out.filled_pairs;
            }
        }
        if (skipped > 0) {
            out.quality_notes.push_back(std::to_string(skipped) + " feature pair(s) in kept sub-category " + s->code +
                                        " left unjudged; set to 0");
        }
    }
    if (r.partial()) out.quality_notes.push_back("submission marked partial by the exporter");
    return out;
}

FilteringTable filtering_stats(const std::vector<ExpertResponse>& responses, const Taxonomy& taxonomy) {
    if (responses.empty()) throw InputError("filtering statistics need at least one response");
    FilteringTable table;
    for (const auto& c : taxonomy.categories()) table.columns.push_back(c.code);
    const auto sub_codes = taxonomy.subcategory_codes();
    table.columns.insert(table.columns.end(), sub_codes.begin(), sub_codes.end());
    const std::size_t n_cat = taxonomy.categories().size();

    std::vector<std::vector<std::size_t>> counts;
    std::map<std::string, std::size_t> row_of;
    for (const auto& r : responses) {
        auto [it, inserted] = row_of.try_emplace(r.scenario, table.rows.size());
        if (inserted) {
            table.rows.push_back({r.scenario, 0, {}});
            counts.emplace_back(table.columns.size(), 0);
        }
        auto& row = table.rows[it->second];
        auto& cnt = counts[it->second];
        ++row.respondents;
        for (std::size_t k = 0; k < table.columns.size(); ++k) {
            const auto& code = table.columns[k];
            const bool is_kept = k < n_cat ? r.kept_categories.count(code) > 0 : r.kept_subcategories.count(code) > 0;
            if (is_kept) ++cnt[k];
        }
    }
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        auto& row = table.rows[i];
        for (const auto c : counts[i]) {
            row.percent.push_back(100.0 * static_cast<double>(c) / static_cast<double>(row.respondents));
        }
    }
    return table;
}

}  // namespace dscore
