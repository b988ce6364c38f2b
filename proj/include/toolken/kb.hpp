#pragma once

// In-memory knowledge base: relations as tools. Lookup is exact-match on the
// normalized subject; a miss is an error, never a fabricated answer.
//
// Facts file format: TSV, one fact per line, relation<TAB>subject<TAB>object.
// Question templates carry a [S] slot for the subject.

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolken/common.hpp"
#include "toolken/core.hpp"

namespace toolken {

struct KbFact {
    std::string relation;
    std::string subject;
    std::string object;
};

class TripleStore {
public:
    static constexpr size_t kMaxRelations = 243;  // full inventory cap

    void set_template(const std::string& relation, const std::string& question_template) {
        if (question_template.find("[S]") == std::string::npos)
            throw DataError("template for " + relation + " lacks the [S] slot");
        templates_[relation] = question_template;
    }

    bool has_template(const std::string& relation) const {
        return templates_.count(relation) > 0;
    }

    const std::string& question_template(const std::string& relation) const {
        auto it = templates_.find(relation);
        if (it == templates_.end()) throw DataError("missing template for relation " + relation);
        return it->second;
    }

    std::string fill_template(const std::string& relation, const std::string& subject) const {
        std::string q = question_template(relation);
        size_t slot = q.find("[S]");
        q.replace(slot, 3, subject);
        return q;
    }

    void add_fact(const KbFact& fact) {
        if (fact.relation.empty() || fact.subject.empty() || fact.object.empty())
            throw DataError("kb fact with empty field");
        auto& rel = facts_[fact.relation];
        rel[normalize_entity(fact.subject)] = fact.object;
        if (facts_.size() > kMaxRelations)
            throw DataError("triple store exceeds the relation inventory cap");
    }

    size_t relation_count() const { return facts_.size(); }

    std::vector<std::string> relations() const {
        std::vector<std::string> out;
        out.reserve(facts_.size());
        for (const auto& [rel, _] : facts_) out.push_back(rel);
        return out;
    }

    size_t fact_count(const std::string& relation) const {
        auto it = facts_.find(relation);
        return it == facts_.end() ? 0 : it->second.size();
    }

    bool has_relation(const std::string& relation) const { return facts_.count(relation) > 0; }

    // The stored tail entity, or an error (unknown relation / unknown subject).
    const std::string& lookup(const std::string& relation, const std::string& subject) const {
        auto it = facts_.find(relation);
        if (it == facts_.end()) throw DataError("unknown relation: " + relation);
        auto fit = it->second.find(normalize_entity(subject));
        if (fit == it->second.end())
            throw DataError("subject not found for " + relation + ": '" + subject + "'");
        return fit->second;
    }

    bool is_stored_object(const std::string& relation, const std::string& object) const {
        auto it = facts_.find(relation);
        if (it == facts_.end()) return false;
        for (const auto& [_, obj] : it->second)
            if (obj == object) return true;
        return false;
    }

    // Facts in deterministic (relation, normalized subject) order.
    std::vector<KbFact> all_facts() const {
        std::vector<KbFact> out;
        for (const auto& [rel, subjects] : facts_)
            for (const auto& [subj, obj] : subjects) out.push_back({rel, subj, obj});
        return out;
    }

private:
    // ordered maps keep iteration deterministic
    std::map<std::string, std::map<std::string, std::string>> facts_;
    std::map<std::string, std::string> templates_;
};

inline std::string exec_kb(const std::string& relation, const std::string& subject,
                           const TripleStore& store) {
    return store.lookup(relation, subject);
}

// ---------------------------------------------------------------------------
// TSV IO.

inline std::vector<KbFact> parse_facts_tsv(const std::string& content) {
    std::vector<KbFact> facts;
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = (nl == std::string::npos) ? content.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        size_t t1 = line.find('\t');
        size_t t2 = t1 == std::string_view::npos ? std::string_view::npos
                                                 : line.find('\t', t1 + 1);
        if (t1 == std::string_view::npos || t2 == std::string_view::npos)
            throw DataError("facts tsv line " + std::to_string(line_no) +
                            ": expected relation<TAB>subject<TAB>object");
        facts.push_back({std::string(line.substr(0, t1)),
                         std::string(line.substr(t1 + 1, t2 - t1 - 1)),
                         std::string(line.substr(t2 + 1))});
    }
    return facts;
}

inline std::string facts_to_tsv(const std::vector<KbFact>& facts) {
    std::string out;
    for (const auto& f : facts)
        out += f.relation + "\t" + f.subject + "\t" + f.object + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Relation toolkens: one tool per relation, single entity argument.

inline void register_kb_relations(ToolRegistry& registry, const TripleStore& store) {
    for (const auto& rel : store.relations()) {
        ToolSpec spec;
        spec.name = rel;
        spec.kind = ToolKind::FunctionWithArgs;
        spec.arg_schema = {{"subject", ArgKind::EntityString}};
        spec.description = "knowledge-base relation " + rel;
        registry.vocab().register_tool(spec);
    }
    const TripleStore* store_ptr = &store;
    for (const auto& rel : store.relations()) {
        registry.bind(rel, [rel, store_ptr](const std::vector<ArgValue>& args) {
            if (args.size() != 1 || !std::holds_alternative<std::string>(args[0]))
                throw DataError(rel + ": expected a single subject entity");
            const std::string& subject = std::get<std::string>(args[0]);
            return ToolResult{exec_kb(rel, subject, *store_ptr), std::nullopt};
        });
    }
}

// ---------------------------------------------------------------------------
// Synthetic KB fixture: deterministic relations, templates and facts built
// from the ToyLM word-piece inventory so questions stay within the tokenizer
// vocabulary. Used by tests, the acceptance suite and the CLI quickstart.

struct SyntheticKb {
    TripleStore store;           // training facts
    std::vector<KbFact> train;   // facts behind `store`
    std::vector<KbFact> eval;    // disjoint facts per relation for questions
};

inline SyntheticKb synth_kb(size_t relations, size_t train_facts_per_relation,
                            size_t eval_facts_per_relation, uint64_t seed) {
    // keyword pool: distinctive nouns from the built-in piece inventory
    static const std::vector<std::string> kws = {
        "winner",   "capital",  "city",     "country", "author",   "director",
        "president", "leader",  "member",   "club",    "location", "language",
        "currency", "population", "area",   "founder", "owner",    "parent",
        "child",    "spouse",   "employer", "company", "university", "genre",
        "color",    "creator",  "developer", "publisher", "origin", "nationality",
        "religion", "position", "award",    "record",  "holder",   "championship",
        "season",   "event",    "sport",    "player",  "coach",    "title",
        "name",     "team",     "head",     "place",   "birth",    "part",
    };
    static const std::vector<std::string> subject_words = {
        "river", "stone", "maple", "harbor", "summit", "meadow", "cedar",
        "falcon", "ember", "willow", "granite", "orchid", "harvest", "lantern",
    };
    // keyword triples, unordered: the recurrent feature state is close to a
    // decayed bag, so relations need word-set signatures that differ in more
    // than one position to stay separable
    const size_t n = kws.size();
    if (relations > n * (n - 1) * (n - 2) / 6)
        throw UsageError("too many synthetic relations requested");

    Rng rng(seed);
    SyntheticKb out;
    size_t made = 0;
    // walk triples with a stride so consecutive relations share few words
    for (size_t i = 0; i < n && made < relations; ++i) {
        for (size_t j = i + 1; j < n && made < relations; ++j) {
            const size_t k = (i * 7 + j * 11) % n;
            if (k == i || k == j) continue;
            const std::string rel = kws[i] + "_" + kws[j] + "_" + kws[k];
            out.store.set_template(
                rel, "What is the " + kws[i] + " " + kws[j] + " " + kws[k] + " of [S]?");
            for (size_t f = 0; f < train_facts_per_relation + eval_facts_per_relation; ++f) {
                const std::string& w1 = subject_words[size_t(
                    rng.uniform_int(0, int64_t(subject_words.size()) - 1))];
                const std::string& w2 = subject_words[size_t(
                    rng.uniform_int(0, int64_t(subject_words.size()) - 1))];
                KbFact fact;
                fact.subject = w1 + " " + std::to_string(made) + "-" + std::to_string(f);
                fact.object = w2 + " " + std::to_string(rng.uniform_int(100, 999));
                fact.relation = rel;
                if (f < train_facts_per_relation) {
                    out.store.add_fact(fact);
                    out.train.push_back(fact);
                } else {
                    out.eval.push_back(fact);
                }
            }
            ++made;
        }
    }
    // eval questions must also be answerable, so their facts are stored too
    for (const auto& f : out.eval) out.store.add_fact(f);
    return out;
}

}  // namespace toolken
