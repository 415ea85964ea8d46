// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fhirforge/common.hpp"
#include "fhirforge/fhir/io.hpp"
#include "fhirforge/fhir/model.hpp"
#include "fhirforge/terminology.hpp"

namespace fhirforge::eval {

// Item-level bundle comparison. A bundle decomposes into items — scalar
// fields and monolithic coded sub-objects — which are aligned across the
// predicted (PD) and baseline (HB) bundles, tagged, and aggregated into a
// tag x judgment x cruciality matrix.

/// One unit of information extracted from a bundle entry.
struct Item {
    std::string path;        // e.g. "Condition.severity", "Patient.name[0]"
    Json value;              // scalar or monolithic JSON fragment
    int owner_ordinal = 0;   // 1-based entry position in the bundle
    std::string owner_type;  // resource type of the owning entry
    bool operator==(const Item&) const = default;
};

inline std::string owner_key(const Item& item) {
    return item.owner_type + "#" + std::to_string(item.owner_ordinal);
}

// Equivalence tags, in the row order of the rendered matrix.
inline constexpr std::array<std::string_view, 6> kTags = {"=", "==", "+", "-", "+-", "X"};

inline bool is_tag(std::string_view s) {
    return std::find(kTags.begin(), kTags.end(), s) != kTags.end();
}

enum class Judgment { worse = 0, neutral = 1, better = 2 };

inline std::string_view to_string(Judgment j) {
    switch (j) {
        case Judgment::worse: return "Worse";
        case Judgment::neutral: return "Neutral";
        case Judgment::better: return "Better";
    }
    return "Neutral";
}

/// An aligned (or one-sided) item pair plus its annotation state.
/// prediff fills the mechanical tags; `=`, `X`, preference, and
/// cruciality judgments stay with the human annotator.
struct AnnotatedItem {
    std::optional<Item> pd;   // absent exactly for tag '-'
    std::optional<Item> hb;   // absent exactly for tag '+'
    std::string tag;          // one of kTags, or "" while pending
    std::string preference;   // "/" prediction preferable, "|" baseline, "" none
    std::string cruciality;   // "!" crucial, "?" minor, "" inherit object default
    bool ambiguous = false;   // alignment could not be decided mechanically
    std::string note;
};

/// A set of annotations plus the object-level cruciality defaults that
/// items inherit when they carry no override.
struct AnnotationSet {
    std::map<std::string, std::string> object_defaults;  // "Condition#1" -> "!" or "?"
    std::string fallback_cruciality = "!";
    std::vector<AnnotatedItem> items;
};

struct CrucialityResolution {
    std::string mark;    // "!" or "?"
    std::string source;  // "item-override" or "object-default"
};

inline CrucialityResolution effective_cruciality(const AnnotationSet& set,
                                                 const AnnotatedItem& item) {
    if (item.cruciality == "!" || item.cruciality == "?")
        return {item.cruciality, "item-override"};
    std::string key;
    if (item.pd)
        key = owner_key(*item.pd);
    else if (item.hb)
        key = owner_key(*item.hb);
    auto it = set.object_defaults.find(key);
    if (it != set.object_defaults.end() && (it->second == "!" || it->second == "?"))
        return {it->second, "object-default"};
    return {set.fallback_cruciality, "object-default"};
}

// ---- itemize ---------------------------------------------------------------

namespace detail {

inline void add_item(std::vector<Item>& out, std::string path, Json value, int ordinal,
                     std::string type) {
    out.push_back(Item{std::move(path), std::move(value), ordinal, std::move(type)});
}

inline Json name_json(const fhir::HumanName& n) {
    Json j = Json::object();
    if (n.use) j["use"] = *n.use;
    if (n.family) j["family"] = *n.family;
    if (!n.given.empty()) j["given"] = n.given;
    return j;
}

inline Json address_json(const fhir::Address& a) {
    Json j = Json::object();
    if (a.line) j["line"] = Json::array({*a.line});
    if (a.city) j["city"] = *a.city;
    if (a.postal_code) j["postalCode"] = *a.postal_code;
    if (a.country) j["country"] = *a.country;
    return j;
}

inline void itemize_into(const fhir::Patient& p, int ordinal, std::vector<Item>& out) {
    const std::string t = "Patient";
    for (size_t i = 0; i < p.name.size(); ++i)
        add_item(out, t + ".name[" + std::to_string(i) + "]", name_json(p.name[i]), ordinal, t);
    if (p.birth_date) add_item(out, t + ".birthDate", *p.birth_date, ordinal, t);
    if (p.gender) add_item(out, t + ".gender", *p.gender, ordinal, t);
    for (size_t i = 0; i < p.address.size(); ++i)
        add_item(out, t + ".address[" + std::to_string(i) + "]", address_json(p.address[i]),
                 ordinal, t);
}

inline void itemize_into(const fhir::Condition& c, int ordinal, std::vector<Item>& out) {
    const std::string t = "Condition";
    // subject carries run-local ids, not clinical content; it is linkage,
    // not an item, just like id itself.
    if (c.code) add_item(out, t + ".code", fhir::detail::codeable_concept_json(*c.code), ordinal, t);
    if (c.clinical_status)
        add_item(out, t + ".clinicalStatus",
                 fhir::detail::codeable_concept_json(*c.clinical_status), ordinal, t);
    if (c.verification_status)
        add_item(out, t + ".verificationStatus",
                 fhir::detail::codeable_concept_json(*c.verification_status), ordinal, t);
    if (c.severity)
        add_item(out, t + ".severity", fhir::detail::codeable_concept_json(*c.severity), ordinal,
                 t);
    for (size_t i = 0; i < c.body_site.size(); ++i)
        add_item(out, t + ".bodySite[" + std::to_string(i) + "]",
                 fhir::detail::codeable_concept_json(c.body_site[i]), ordinal, t);
    for (size_t i = 0; i < c.category.size(); ++i)
        add_item(out, t + ".category[" + std::to_string(i) + "]",
                 fhir::detail::codeable_concept_json(c.category[i]), ordinal, t);
    if (c.onset_date_time) add_item(out, t + ".onsetDateTime", *c.onset_date_time, ordinal, t);
}

inline Json dose_quantity_json(const fhir::DoseQuantity& q) {
    Json j = Json::object();
    j["value"] = q.value;
    j["unit"] = q.unit;
    if (q.system) j["system"] = *q.system;
    if (q.code) j["code"] = *q.code;
    return j;
}

inline void itemize_into(const fhir::MedicationStatement& m, int ordinal,
                         std::vector<Item>& out) {
    const std::string t = "MedicationStatement";
    if (!m.status.empty()) add_item(out, t + ".status", m.status, ordinal, t);
    add_item(out, t + ".medicationCodeableConcept",
             fhir::detail::codeable_concept_json(m.medication), ordinal, t);
    for (size_t i = 0; i < m.dosage.size(); ++i) {
        const std::string dp = t + ".dosage[" + std::to_string(i) + "]";
        const auto& d = m.dosage[i];
        if (d.text) add_item(out, dp + ".text", *d.text, ordinal, t);
        for (size_t j = 0; j < d.dose_and_rate.size(); ++j) {
            const std::string drp = dp + ".doseAndRate[" + std::to_string(j) + "]";
            const auto& dr = d.dose_and_rate[j];
            if (dr.type)
                add_item(out, drp + ".type", fhir::detail::codeable_concept_json(*dr.type),
                         ordinal, t);
            if (dr.dose_quantity)
                add_item(out, drp + ".doseQuantity", dose_quantity_json(*dr.dose_quantity),
                         ordinal, t);
        }
        if (d.timing && d.timing->code)
            add_item(out, dp + ".timing", fhir::detail::codeable_concept_json(*d.timing->code),
                     ordinal, t);
    }
}

}  // namespace detail

/// Depth-first item enumeration in declaration order, resources in bundle
/// order. Coded sub-objects (CodeableConcept, doseQuantity, name entries)
/// are monolithic; id and subject linkage are not items.
inline std::vector<Item> itemize(const fhir::Bundle& bundle) {
    std::vector<Item> out;
    for (size_t i = 0; i < bundle.entries.size(); ++i) {
        const int ordinal = static_cast<int>(i) + 1;
        std::visit([&](const auto& r) { detail::itemize_into(r, ordinal, out); },
                   bundle.entries[i]);
    }
    return out;
}

// ---- prediff ----------------------------------------------------------------

namespace detail {

inline std::string alignment_text(const fhir::Resource& r) {
    std::string text;
    auto add_cc = [&](const fhir::CodeableConcept& cc) {
        if (cc.text) text += *cc.text + " ";
        for (const auto& c : cc.coding)
            if (c.display) text += *c.display + " ";
    };
    if (const auto* c = std::get_if<fhir::Condition>(&r)) {
        if (c->code) add_cc(*c->code);
    } else if (const auto* m = std::get_if<fhir::MedicationStatement>(&r)) {
        add_cc(m->medication);
    }
    return text;
}

inline double token_jaccard(const std::string& a, const std::string& b) {
    const auto ta = term::term_tokens(a);
    const auto tb = term::term_tokens(b);
    const std::set<std::string> sa(ta.begin(), ta.end());
    const std::set<std::string> sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 0.0;
    size_t common = 0;
    for (const auto& t : sa)
        if (sb.contains(t)) ++common;
    const size_t uni = sa.size() + sb.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

struct ResourceSlot {
    int ordinal;  // 1-based position in its bundle
    const fhir::Resource* resource;
};

struct Pairing {
    std::vector<std::pair<ResourceSlot, ResourceSlot>> pairs;  // (pd, hb)
    std::vector<ResourceSlot> pd_only;
    std::vector<ResourceSlot> hb_only;
    std::set<int> ambiguous_pd;  // pd ordinals whose pairing was a coin toss
};

/// Greedy best-score matching of same-type resources. A pair is flagged
/// ambiguous when the content offered an equally scored conflicting
/// partner for either side (no distinguishing key) — judged against the
/// full score matrix, so a pairing forced by an earlier coin toss is
/// flagged too. Equal scores on disjoint pairs are not conflicts.
inline Pairing pair_resources(std::vector<ResourceSlot> pd, std::vector<ResourceSlot> hb) {
    Pairing out;
    if (pd.size() == 1 && hb.size() == 1) {
        out.pairs.emplace_back(pd[0], hb[0]);
        return out;
    }
    std::vector<std::vector<double>> score(pd.size(), std::vector<double>(hb.size(), 0.0));
    for (size_t pi = 0; pi < pd.size(); ++pi)
        for (size_t hi = 0; hi < hb.size(); ++hi)
            score[pi][hi] = token_jaccard(alignment_text(*pd[pi].resource),
                                          alignment_text(*hb[hi].resource));

    struct Cand {
        size_t pi, hi;
        double score;
    };
    std::vector<bool> pd_used(pd.size(), false), hb_used(hb.size(), false);
    while (true) {
        std::optional<Cand> best;
        for (size_t pi = 0; pi < pd.size(); ++pi) {
            if (pd_used[pi]) continue;
            for (size_t hi = 0; hi < hb.size(); ++hi) {
                if (hb_used[hi]) continue;
                if (!best || score[pi][hi] > best->score) best = Cand{pi, hi, score[pi][hi]};
            }
        }
        if (!best) break;
        bool contested = false;
        for (size_t hi = 0; hi < hb.size() && !contested; ++hi)
            if (hi != best->hi && score[best->pi][hi] == best->score) contested = true;
        for (size_t pi = 0; pi < pd.size() && !contested; ++pi)
            if (pi != best->pi && score[pi][best->hi] == best->score) contested = true;
        out.pairs.emplace_back(pd[best->pi], hb[best->hi]);
        if (contested) out.ambiguous_pd.insert(pd[best->pi].ordinal);
        pd_used[best->pi] = true;
        hb_used[best->hi] = true;
    }
    for (size_t pi = 0; pi < pd.size(); ++pi)
        if (!pd_used[pi]) out.pd_only.push_back(pd[pi]);
    for (size_t hi = 0; hi < hb.size(); ++hi)
        if (!hb_used[hi]) out.hb_only.push_back(hb[hi]);
    return out;
}

inline std::vector<Item> items_of(const fhir::Resource& r, int ordinal) {
    std::vector<Item> out;
    std::visit([&](const auto& v) { itemize_into(v, ordinal, out); }, r);
    return out;
}

}  // namespace detail

/// Mechanical diff: aligns resources by type and lexical key, items by
/// path, and assigns only the tags a machine may assign — `==` for
/// byte-equal values, `+` PD-only, `-` HB-only, `+-` for value
/// differences. `=`, `X`, and preferences are left to the annotator.
inline std::vector<AnnotatedItem> prediff(const fhir::Bundle& pd, const fhir::Bundle& hb) {
    std::vector<AnnotatedItem> out;

    auto slots_by_type = [](const fhir::Bundle& b) {
        std::map<std::string, std::vector<detail::ResourceSlot>> m;
        for (size_t i = 0; i < b.entries.size(); ++i)
            m[std::string(fhir::resource_type(b.entries[i]))].push_back(
                detail::ResourceSlot{static_cast<int>(i) + 1, &b.entries[i]});
        return m;
    };
    auto pd_types = slots_by_type(pd);
    auto hb_types = slots_by_type(hb);

    std::set<std::string> types;
    for (const auto& [t, _] : pd_types) types.insert(t);
    for (const auto& [t, _] : hb_types) types.insert(t);

    auto emit_one_sided = [&](const detail::ResourceSlot& slot, bool is_pd) {
        for (auto& item : detail::items_of(*slot.resource, slot.ordinal)) {
            AnnotatedItem a;
            a.tag = is_pd ? "+" : "-";
            if (is_pd)
                a.pd = std::move(item);
            else
                a.hb = std::move(item);
            out.push_back(std::move(a));
        }
    };

    for (const auto& type : types) {
        auto pd_slots = pd_types.contains(type) ? pd_types[type] : std::vector<detail::ResourceSlot>{};
        auto hb_slots = hb_types.contains(type) ? hb_types[type] : std::vector<detail::ResourceSlot>{};
        auto pairing = detail::pair_resources(pd_slots, hb_slots);

        for (const auto& [pslot, hslot] : pairing.pairs) {
            const bool ambiguous = pairing.ambiguous_pd.contains(pslot.ordinal);
            auto pd_items = detail::items_of(*pslot.resource, pslot.ordinal);
            auto hb_items = detail::items_of(*hslot.resource, hslot.ordinal);
            std::map<std::string, Item*> hb_by_path;
            for (auto& i : hb_items) hb_by_path[i.path] = &i;
            std::set<std::string> consumed;
            for (auto& pi : pd_items) {
                AnnotatedItem a;
                a.ambiguous = ambiguous;
                auto it = hb_by_path.find(pi.path);
                if (it != hb_by_path.end()) {
                    a.tag = pi.value.dump() == it->second->value.dump() ? "==" : "+-";
                    a.hb = *it->second;
                    consumed.insert(pi.path);
                } else {
                    a.tag = "+";
                }
                a.pd = std::move(pi);
                out.push_back(std::move(a));
            }
            for (auto& hi : hb_items) {
                if (consumed.contains(hi.path)) continue;
                AnnotatedItem a;
                a.ambiguous = ambiguous;
                a.tag = "-";
                a.hb = std::move(hi);
                out.push_back(std::move(a));
            }
        }
        for (const auto& slot : pairing.pd_only) emit_one_sided(slot, true);
        for (const auto& slot : pairing.hb_only) emit_one_sided(slot, false);
    }
    return out;
}

// ---- aggregation ------------------------------------------------------------

/// Tag x (judgment x cruciality) count matrix plus derived figures.
/// Column layout: Worse!, Worse?, Neutral!, Neutral?, Better!, Better?.
struct EvalMatrix {
    std::array<std::array<long, 6>, 6> cells{};  // [tag row][column]
    std::array<long, 3> totals{};                // per judgment, summed over cruciality
    long total_items = 0;
    long hallucinated_items = 0;  // tag X
    double hallucination_rate = 0.0;
};

inline size_t tag_row(std::string_view tag) {
    for (size_t i = 0; i < kTags.size(); ++i)
        if (kTags[i] == tag) return i;
    return kTags.size();
}

/// Judgment mapping: X is always Worse; otherwise the preference mark
/// decides (| Worse, / Better, none Neutral).
inline Judgment judge(const AnnotatedItem& item) {
    if (item.tag == "X") return Judgment::worse;
    if (item.preference == "|") return Judgment::worse;
    if (item.preference == "/") return Judgment::better;
    return Judgment::neutral;
}

inline std::optional<std::string> annotation_problem(const AnnotatedItem& a) {
    if (!is_tag(a.tag)) return "unknown tag '" + a.tag + "'";
    if (a.preference != "" && a.preference != "/" && a.preference != "|")
        return "unknown preference '" + a.preference + "'";
    if (a.cruciality != "" && a.cruciality != "!" && a.cruciality != "?")
        return "unknown cruciality '" + a.cruciality + "'";
    if (!a.pd && !a.hb) return "annotation has neither side";
    if (a.tag == "+" && a.hb) return "tag '+' requires the baseline side to be absent";
    if (a.tag == "+" && !a.pd) return "tag '+' requires the prediction side";
    if (a.tag == "-" && a.pd) return "tag '-' requires the prediction side to be absent";
    if (a.tag == "-" && !a.hb) return "tag '-' requires the baseline side";
    if (a.tag == "X" && !a.pd) return "tag 'X' marks a prediction defect; prediction side missing";
    if ((a.tag == "==" || a.tag == "=" || a.tag == "+-") && (!a.pd || !a.hb))
        return "tag '" + a.tag + "' requires both sides";
    if (a.tag == "==" && a.pd->value.dump() != a.hb->value.dump())
        return "tag '==' requires byte-equal values after canonical serialization";
    return std::nullopt;
}

inline std::string annotation_path(const AnnotatedItem& a) {
    if (a.pd) return a.pd->path;
    if (a.hb) return a.hb->path;
    return "<empty>";
}

/// Fold annotations into the matrix; any annotation that violates the
/// AnnotatedItem invariants is rejected, naming its path.
inline Result<EvalMatrix> aggregate(const AnnotationSet& set) {
    EvalMatrix m;
    for (const auto& a : set.items) {
        if (auto problem = annotation_problem(a))
            return make_error("bad-annotation", annotation_path(a) + ": " + *problem);
        const auto cruciality = effective_cruciality(set, a);
        const Judgment j = judge(a);
        const size_t row = tag_row(a.tag);
        const size_t col =
            static_cast<size_t>(j) * 2 + (cruciality.mark == "!" ? 0 : 1);
        m.cells[row][col] += 1;
        m.total_items += 1;
        if (a.tag == "X") m.hallucinated_items += 1;
    }
    for (size_t j = 0; j < 3; ++j) {
        long sum = 0;
        for (size_t row = 0; row < kTags.size(); ++row) sum += m.cells[row][j * 2] + m.cells[row][j * 2 + 1];
        m.totals[j] = sum;
    }
    m.hallucination_rate =
        m.total_items == 0
            ? 0.0
            : static_cast<double>(m.hallucinated_items) / static_cast<double>(m.total_items);
    return m;
}

// ---- rendering ----------------------------------------------------------------

inline std::string render_matrix(const EvalMatrix& m) {
    char buf[128];
    std::string out;
    out += "       | Worse than HB | Neutral       | Better than HB\n";
    out += "  tag  |    !      ?   |    !      ?   |    !      ?\n";
    out += "  -----+---------------+---------------+---------------\n";
    for (size_t row = 0; row < kTags.size(); ++row) {
        std::snprintf(buf, sizeof(buf), "  %-5s|%5ld  %5ld  |%5ld  %5ld  |%5ld  %5ld\n",
                      std::string(kTags[row]).c_str(), m.cells[row][0], m.cells[row][1],
                      m.cells[row][2], m.cells[row][3], m.cells[row][4], m.cells[row][5]);
        out += buf;
    }
    out += "  -----+---------------+---------------+---------------\n";
    std::snprintf(buf, sizeof(buf), "  total|%12ld   |%12ld   |%12ld\n", m.totals[0], m.totals[1],
                  m.totals[2]);
    out += buf;
    std::snprintf(buf, sizeof(buf), "  hallucination rate: %.2f%% (%ld/%ld)\n",
                  m.hallucination_rate * 100.0, m.hallucinated_items, m.total_items);
    out += buf;
    return out;
}

/// CSV export, one row per (tag, cruciality, judgment) cell.
inline std::string matrix_to_csv(const EvalMatrix& m) {
    std::string out = "tag,cruciality,judgment,count\n";
    for (size_t row = 0; row < kTags.size(); ++row)
        for (size_t j = 0; j < 3; ++j)
            for (size_t c = 0; c < 2; ++c) {
                out += std::string(kTags[row]) + "," + (c == 0 ? "!" : "?") + "," +
                       std::string(to_string(static_cast<Judgment>(j))) + "," +
                       std::to_string(m.cells[row][j * 2 + c]) + "\n";
            }
    return out;
}

// ---- annotation persistence ---------------------------------------------------
// JSON Lines: header {"version":1,"fallback_cruciality":...,"object_defaults":{...}}
// then one AnnotatedItem per line, sigils stored verbatim.

namespace detail {

inline Json item_side_json(const Item& i) {
    Json j = Json::object();
    j["owner"] = owner_key(i);
    j["path"] = i.path;
    j["value"] = i.value;
    return j;
}

inline Result<Item> item_side_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("path") || !j["path"].is_string())
        return make_error("bad-format", "item side needs a path");
    Item i;
    i.path = j["path"].get<std::string>();
    if (j.contains("value")) i.value = j["value"];
    if (j.contains("owner") && j["owner"].is_string()) {
        const std::string owner = j["owner"].get<std::string>();
        const size_t hash = owner.rfind('#');
        if (hash != std::string::npos) {
            i.owner_type = owner.substr(0, hash);
            try {
                i.owner_ordinal = std::stoi(owner.substr(hash + 1));
            } catch (...) {
                i.owner_ordinal = 0;
            }
        }
    }
    return i;
}

}  // namespace detail

inline Json annotated_item_to_json(const AnnotatedItem& a) {
    Json j = Json::object();
    j["tag"] = a.tag;
    j["preference"] = a.preference;
    j["cruciality"] = a.cruciality;
    j["alignment"] = a.ambiguous ? "ambiguous" : "ok";
    if (!a.note.empty()) j["note"] = a.note;
    j["pd"] = a.pd ? detail::item_side_json(*a.pd) : Json(nullptr);
    j["hb"] = a.hb ? detail::item_side_json(*a.hb) : Json(nullptr);
    return j;
}

inline Result<AnnotatedItem> annotated_item_from_json(const Json& j) {
    if (!j.is_object()) return make_error("bad-format", "annotation line must be an object");
    AnnotatedItem a;
    if (j.contains("tag") && j["tag"].is_string()) a.tag = j["tag"].get<std::string>();
    if (j.contains("preference") && j["preference"].is_string())
        a.preference = j["preference"].get<std::string>();
    if (j.contains("cruciality") && j["cruciality"].is_string())
        a.cruciality = j["cruciality"].get<std::string>();
    if (j.contains("alignment") && j["alignment"].is_string())
        a.ambiguous = j["alignment"].get<std::string>() == "ambiguous";
    if (j.contains("note") && j["note"].is_string()) a.note = j["note"].get<std::string>();
    if (j.contains("pd") && !j["pd"].is_null()) {
        auto side = detail::item_side_from_json(j["pd"]);
        if (!side.ok()) return side.error();
        a.pd = std::move(side.value());
    }
    if (j.contains("hb") && !j["hb"].is_null()) {
        auto side = detail::item_side_from_json(j["hb"]);
        if (!side.ok()) return side.error();
        a.hb = std::move(side.value());
    }
    return a;
}

inline std::string annotations_to_jsonl(const AnnotationSet& set) {
    Json header = Json::object();
    header["version"] = 1;
    header["fallback_cruciality"] = set.fallback_cruciality;
    Json defaults = Json::object();
    for (const auto& [k, v] : set.object_defaults) defaults[k] = v;
    header["object_defaults"] = std::move(defaults);
    std::string out = header.dump();
    out += "\n";
    for (const auto& a : set.items) {
        out += annotated_item_to_json(a).dump();
        out += "\n";
    }
    return out;
}

inline Result<AnnotationSet> annotations_from_jsonl(const std::string& text,
                                                    const std::string& origin) {
    AnnotationSet set;
    std::istringstream in(text);
    std::string line;
    size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (strings::trim(line).empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            return make_error("bad-format", origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
        if (!have_header) {
            if (!j.is_object() || !j.contains("version"))
                return make_error("bad-format", origin + ": first line must be a header");
            if (j.contains("fallback_cruciality") && j["fallback_cruciality"].is_string())
                set.fallback_cruciality = j["fallback_cruciality"].get<std::string>();
            if (j.contains("object_defaults") && j["object_defaults"].is_object())
                for (const auto& [k, v] : j["object_defaults"].items())
                    if (v.is_string()) set.object_defaults[k] = v.get<std::string>();
            have_header = true;
            continue;
        }
        auto item = annotated_item_from_json(j);
        if (!item.ok())
            return make_error(item.error().kind,
                              origin + ":" + std::to_string(lineno) + ": " + item.error().message);
        set.items.push_back(std::move(item.value()));
    }
    if (!have_header) return make_error("bad-format", origin + ": empty annotation file");
    return set;
}

inline Result<AnnotationSet> load_annotations(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return make_error("io", "cannot open annotation file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return annotations_from_jsonl(ss.str(), path);
}

inline Result<bool> save_annotations(const AnnotationSet& set, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) return make_error("io", "cannot write annotation file: " + path);
    out << annotations_to_jsonl(set);
    out.close();
    if (!out) return make_error("io", "failed writing annotation file: " + path);
    return true;
}

}  // namespace fhirforge::eval
