#pragma once

// Rule-based household environment for embodied plan checking. Actions are
// verbs over named objects; a data-driven rule table maps each action to
// precondition and effect lists. Invalid steps leave the state unchanged and
// come back as Violation values, never exceptions.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolken/common.hpp"
#include "toolken/core.hpp"

namespace toolken {

struct ObjectSpec {
    std::string name;
    std::set<std::string> properties;  // room, sittable, grabbable, ...
};

struct GoalAssertion {
    std::string pred;             // sitting | lying | holding | at | open | on
    std::string object;           // for holding/at/open/on
    bool value = true;
};

struct PlanScenario {
    std::string goal;
    std::string instruction;
    std::vector<std::string> rooms;
    std::vector<ObjectSpec> objects;
    std::string initial_room;
    std::map<std::string, bool> initial_open;
    std::map<std::string, bool> initial_on;
    std::vector<GoalAssertion> goal_assertions;
    // demonstration plan (training scenarios only)
    std::vector<std::pair<std::string, std::string>> demo_plan;
};

struct Violation {
    std::string rule;
};

struct ActionRule {
    std::vector<std::string> preconditions;
    std::vector<std::string> effects;
};

using RuleTable = std::map<std::string, ActionRule>;

// The built-in 25-verb rule table; also exportable/loadable as JSON.
inline RuleTable default_rule_table() {
    auto move_pre = std::vector<std::string>{"exists", "not_sitting", "not_lying"};
    RuleTable t;
    t["WALK"] = {move_pre, {"move_to"}};
    t["RUN"] = {move_pre, {"move_to"}};
    t["FIND"] = {move_pre, {"move_to"}};
    t["SIT"] = {{"exists", "sittable", "at_object", "not_sitting", "not_lying"}, {"sit_on"}};
    t["STANDUP"] = {{"sitting_on_object"}, {"stand"}};
    t["GRAB"] = {{"exists", "not_room", "grabbable", "at_object", "hand_free"}, {"grab"}};
    t["DROP"] = {{"holding_object"}, {"drop"}};
    t["OPEN"] = {{"exists", "openable", "at_object", "is_closed"}, {"open"}};
    t["CLOSE"] = {{"exists", "openable", "at_object", "is_open"}, {"close"}};
    t["SWITCHON"] = {{"exists", "switchable", "at_object", "is_off"}, {"switch_on"}};
    t["SWITCHOFF"] = {{"exists", "switchable", "at_object", "is_on"}, {"switch_off"}};
    t["READ"] = {{"exists", "readable", "holding_object"}, {}};
    t["WATCH"] = {{"exists", "switchable", "is_on"}, {}};
    t["DRINK"] = {{"exists", "drinkable", "holding_object"}, {}};
    t["EAT"] = {{"exists", "edible", "holding_object"}, {}};
    t["LIE"] = {{"exists", "lieable", "at_object", "not_sitting", "not_lying"}, {"lie_on"}};
    t["WAKEUP"] = {{"lying_on_object"}, {"stand"}};
    t["SLEEP"] = {{"exists", "lieable", "lying_on_object"}, {}};
    t["TOUCH"] = {{"exists", "not_room", "at_object"}, {}};
    t["LOOKAT"] = {{"exists", "at_object"}, {}};
    t["TURNTO"] = {{"exists"}, {}};
    t["POINTAT"] = {{"exists"}, {}};
    t["PUSH"] = {{"exists", "not_room", "at_object", "not_sitting"}, {}};
    t["PULL"] = {{"exists", "not_room", "at_object", "not_sitting"}, {}};
    t["TYPE"] = {{"exists", "typeable", "at_object"}, {}};
    return t;
}

inline nlohmann::json rule_table_to_json(const RuleTable& table) {
    nlohmann::json doc;
    for (const auto& [action, rule] : table) {
        doc[action] = {{"preconditions", rule.preconditions}, {"effects", rule.effects}};
    }
    return doc;
}

inline RuleTable rule_table_from_json(const nlohmann::json& doc) {
    RuleTable table;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        ActionRule rule;
        for (const auto& p : it.value().at("preconditions"))
            rule.preconditions.push_back(p.get<std::string>());
        for (const auto& e : it.value().at("effects"))
            rule.effects.push_back(e.get<std::string>());
        table[it.key()] = rule;
    }
    return table;
}

class MiniHome {
public:
    MiniHome(const PlanScenario& scenario, RuleTable rules = default_rule_table())
        : rules_(std::move(rules)) {
        for (const auto& r : scenario.rooms) {
            ObjectSpec spec{r, {"room"}};
            objects_[r] = spec;
        }
        for (const auto& o : scenario.objects) {
            if (objects_.count(o.name))
                throw DataError("scenario has two objects named " + o.name);
            objects_[o.name] = o;
        }
        state_.location = scenario.initial_room;
        if (!objects_.count(state_.location))
            throw DataError("initial room not in scenario: " + state_.location);
        for (const auto& [name, v] : scenario.initial_open) state_.open[name] = v;
        for (const auto& [name, v] : scenario.initial_on) state_.on[name] = v;
    }

    struct State {
        std::string location;
        std::optional<std::string> sitting_on;
        std::optional<std::string> lying_on;
        std::set<std::string> holding;
        std::map<std::string, bool> open;
        std::map<std::string, bool> on;

        bool operator==(const State&) const = default;
    };

    const State& state() const { return state_; }

    bool has_object(const std::string& name) const { return objects_.count(name) > 0; }

    bool has_property(const std::string& name, const std::string& prop) const {
        auto it = objects_.find(name);
        return it != objects_.end() && it->second.properties.count(prop) > 0;
    }

    // Applies one step if every precondition holds; otherwise returns the
    // first broken rule and leaves the state untouched.
    std::optional<Violation> apply_step(const std::string& action, const std::string& object) {
        auto rule_it = rules_.find(action);
        if (rule_it == rules_.end()) return Violation{"unknown action " + action};
        for (const auto& pre : rule_it->second.preconditions) {
            if (auto v = check(pre, object)) return v;
        }
        for (const auto& eff : rule_it->second.effects) apply_effect(eff, object);
        return std::nullopt;
    }

    bool check_assertion(const GoalAssertion& g) const {
        if (g.pred == "sitting") return state_.sitting_on.has_value() == g.value;
        if (g.pred == "lying") return state_.lying_on.has_value() == g.value;
        if (g.pred == "holding") return (state_.holding.count(g.object) > 0) == g.value;
        if (g.pred == "at") return (state_.location == g.object) == g.value;
        if (g.pred == "open") return opened(g.object) == g.value;
        if (g.pred == "on") return switched_on(g.object) == g.value;
        throw DataError("unknown goal predicate: " + g.pred);
    }

    bool goal_satisfied(const std::vector<GoalAssertion>& goal) const {
        for (const auto& g : goal)
            if (!check_assertion(g)) return false;
        return true;
    }

private:
    bool opened(const std::string& o) const {
        auto it = state_.open.find(o);
        return it != state_.open.end() && it->second;
    }
    bool switched_on(const std::string& o) const {
        auto it = state_.on.find(o);
        return it != state_.on.end() && it->second;
    }

    std::optional<Violation> check(const std::string& pre, const std::string& obj) const {
        if (pre == "exists")
            return has_object(obj) ? std::nullopt
                                   : std::optional<Violation>{{"no object " + obj}};
        if (pre == "not_room")
            return !has_property(obj, "room") ? std::nullopt
                                              : std::optional<Violation>{{"cannot act on a room"}};
        if (pre == "at_object")
            return state_.location == obj ? std::nullopt
                                          : std::optional<Violation>{{"not at " + obj}};
        if (pre == "not_sitting")
            return !state_.sitting_on ? std::nullopt
                                      : std::optional<Violation>{{"agent is sitting"}};
        if (pre == "not_lying")
            return !state_.lying_on ? std::nullopt
                                    : std::optional<Violation>{{"agent is lying"}};
        if (pre == "sitting_on_object")
            return state_.sitting_on == obj ? std::nullopt
                                            : std::optional<Violation>{{"not sitting on " + obj}};
        if (pre == "lying_on_object")
            return state_.lying_on == obj ? std::nullopt
                                          : std::optional<Violation>{{"not lying on " + obj}};
        if (pre == "holding_object")
            return state_.holding.count(obj) ? std::nullopt
                                             : std::optional<Violation>{{"not holding " + obj}};
        if (pre == "hand_free")
            return state_.holding.empty() ? std::nullopt
                                          : std::optional<Violation>{{"hands are full"}};
        if (pre == "is_open")
            return opened(obj) ? std::nullopt
                               : std::optional<Violation>{{obj + " is closed"}};
        if (pre == "is_closed")
            return !opened(obj) ? std::nullopt
                                : std::optional<Violation>{{obj + " is open"}};
        if (pre == "is_on")
            return switched_on(obj) ? std::nullopt
                                    : std::optional<Violation>{{obj + " is off"}};
        if (pre == "is_off")
            return !switched_on(obj) ? std::nullopt
                                     : std::optional<Violation>{{obj + " is on"}};
        // property predicates: sittable, lieable, grabbable, openable, ...
        return has_property(obj, pre) ? std::nullopt
                                      : std::optional<Violation>{{"not " + pre}};
    }

    void apply_effect(const std::string& eff, const std::string& obj) {
        if (eff == "move_to") state_.location = obj;
        else if (eff == "sit_on") state_.sitting_on = obj;
        else if (eff == "lie_on") state_.lying_on = obj;
        else if (eff == "stand") { state_.sitting_on.reset(); state_.lying_on.reset(); }
        else if (eff == "grab") state_.holding.insert(obj);
        else if (eff == "drop") state_.holding.erase(obj);
        else if (eff == "open") state_.open[obj] = true;
        else if (eff == "close") state_.open[obj] = false;
        else if (eff == "switch_on") state_.on[obj] = true;
        else if (eff == "switch_off") state_.on[obj] = false;
        else throw DataError("unknown effect: " + eff);
    }

    RuleTable rules_;
    std::map<std::string, ObjectSpec> objects_;
    State state_;
};

// ---------------------------------------------------------------------------
// Plan scoring.

struct PlanOutcome {
    bool grounded = false;
    bool executable = false;
    bool success = false;
    bool success_relaxed = false;
};

// `steps` excludes the end marker. Grounding is checked against the toolken
// vocabulary; executability and goals against the scenario.
inline PlanOutcome run_plan(const PlanScenario& scenario,
                            const std::vector<std::pair<std::string, std::string>>& steps,
                            const ToolkenVocab& vocab,
                            const RuleTable& rules = default_rule_table()) {
    PlanOutcome out;
    out.grounded = true;
    for (const auto& [action, object] : steps) {
        auto aid = vocab.lookup(action);
        auto oid = vocab.lookup(object);
        if (!aid || vocab.tool_for(*aid).kind != ToolKind::NoArgAction) out.grounded = false;
        if (!oid || vocab.tool_for(*oid).kind != ToolKind::NoArgObject) out.grounded = false;
    }

    MiniHome env(scenario, rules);
    out.executable = true;
    out.success_relaxed = env.goal_satisfied(scenario.goal_assertions);
    for (const auto& [action, object] : steps) {
        if (env.apply_step(action, object)) {
            out.executable = false;
            break;
        }
        if (env.goal_satisfied(scenario.goal_assertions)) out.success_relaxed = true;
    }
    out.success = out.executable && env.goal_satisfied(scenario.goal_assertions);
    return out;
}

// ---------------------------------------------------------------------------
// Scenario JSON.

inline nlohmann::json scenario_to_json(const PlanScenario& s) {
    nlohmann::json doc;
    doc["goal"] = s.goal;
    doc["instruction"] = s.instruction;
    doc["rooms"] = s.rooms;
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : s.objects) {
        objs.push_back({{"name", o.name},
                        {"properties", std::vector<std::string>(o.properties.begin(),
                                                                o.properties.end())}});
    }
    doc["objects"] = std::move(objs);
    nlohmann::json init;
    init["room"] = s.initial_room;
    if (!s.initial_open.empty()) init["open"] = s.initial_open;
    if (!s.initial_on.empty()) init["on"] = s.initial_on;
    doc["initial_state"] = std::move(init);
    nlohmann::json goals = nlohmann::json::array();
    for (const auto& g : s.goal_assertions) {
        nlohmann::json jg = {{"pred", g.pred}, {"value", g.value}};
        if (!g.object.empty()) jg["object"] = g.object;
        goals.push_back(std::move(jg));
    }
    doc["goal_assertions"] = std::move(goals);
    if (!s.demo_plan.empty()) {
        nlohmann::json plan = nlohmann::json::array();
        for (const auto& [a, o] : s.demo_plan) plan.push_back({a, o});
        doc["demo_plan"] = std::move(plan);
    }
    return doc;
}

inline PlanScenario scenario_from_json(const nlohmann::json& doc) {
    PlanScenario s;
    s.goal = doc.at("goal").get<std::string>();
    s.instruction = doc.at("instruction").get<std::string>();
    for (const auto& r : doc.at("rooms")) s.rooms.push_back(r.get<std::string>());
    for (const auto& jo : doc.at("objects")) {
        ObjectSpec o;
        o.name = jo.at("name").get<std::string>();
        for (const auto& p : jo.at("properties")) o.properties.insert(p.get<std::string>());
        s.objects.push_back(std::move(o));
    }
    const auto& init = doc.at("initial_state");
    s.initial_room = init.at("room").get<std::string>();
    if (init.contains("open"))
        for (auto it = init["open"].begin(); it != init["open"].end(); ++it)
            s.initial_open[it.key()] = it.value().get<bool>();
    if (init.contains("on"))
        for (auto it = init["on"].begin(); it != init["on"].end(); ++it)
            s.initial_on[it.key()] = it.value().get<bool>();
    for (const auto& jg : doc.at("goal_assertions")) {
        GoalAssertion g;
        g.pred = jg.at("pred").get<std::string>();
        g.value = jg.at("value").get<bool>();
        if (jg.contains("object")) g.object = jg.at("object").get<std::string>();
        s.goal_assertions.push_back(std::move(g));
    }
    if (doc.contains("demo_plan"))
        for (const auto& jp : doc.at("demo_plan"))
            s.demo_plan.emplace_back(jp.at(0).get<std::string>(), jp.at(1).get<std::string>());
    return s;
}

// ---------------------------------------------------------------------------
// Default object inventory (32 objects including 4 rooms) and the scenario
// corpus generator used for plan-mode training and evaluation.

inline const std::vector<ObjectSpec>& default_objects() {
    static const std::vector<ObjectSpec> objs = {
        {"chair", {"sittable"}},
        {"stool", {"sittable"}},
        {"couch", {"sittable", "lieable"}},
        {"bed", {"sittable", "lieable"}},
        {"desk", {}},
        {"novel", {"grabbable", "readable"}},
        {"mail", {"grabbable", "readable", "openable"}},
        {"television", {"switchable"}},
        {"computer", {"switchable", "typeable"}},
        {"phone", {"grabbable", "switchable"}},
        {"glass", {"grabbable", "drinkable"}},
        {"mug", {"grabbable", "drinkable"}},
        {"fridge", {"openable"}},
        {"cabinet", {"openable"}},
        {"drawer", {"openable"}},
        {"lamp", {"switchable"}},
        {"remote", {"grabbable"}},
        {"keyboard", {"grabbable", "typeable"}},
        {"apple", {"grabbable", "edible"}},
        {"water", {"grabbable", "drinkable"}},
        {"pillow", {"grabbable"}},
        {"blanket", {"grabbable"}},
        {"window", {"openable"}},
        {"door", {"openable"}},
        {"plant", {}},
        {"mirror", {}},
        {"toothbrush", {"grabbable"}},
        {"food", {"grabbable", "edible"}},
    };
    return objs;
}

inline const std::vector<std::string>& default_rooms() {
    static const std::vector<std::string> rooms = {"home_office", "kitchen", "bedroom",
                                                   "living_room"};
    return rooms;
}

// Registers the 25 action toolkens, 32 object toolkens and [END].
inline void register_plan_toolkens(ToolkenVocab& vocab) {
    for (const auto& [action, _] : default_rule_table()) {
        ToolSpec spec;
        spec.name = action;
        spec.kind = ToolKind::NoArgAction;
        spec.description = "household action " + action;
        vocab.register_tool(spec);
    }
    for (const auto& room : default_rooms()) {
        ToolSpec spec;
        spec.name = room;
        spec.kind = ToolKind::NoArgObject;
        spec.description = "room " + room;
        vocab.register_tool(spec);
    }
    for (const auto& obj : default_objects()) {
        ToolSpec spec;
        spec.name = obj.name;
        spec.kind = ToolKind::NoArgObject;
        spec.description = "object " + obj.name;
        vocab.register_tool(spec);
    }
    vocab.register_end_marker();
}

// Scenario corpus across goal families. Demonstration plans always pair SIT
// and LIE with genuinely sittable/lieable objects; desk stays a distractor.
inline std::vector<PlanScenario> demo_corpus(size_t count, uint64_t seed) {
    Rng rng(seed);
    std::vector<PlanScenario> out;
    out.reserve(count);

    struct Family {
        std::string goal;
        std::vector<std::string> instructions;  // {0} = key object, {1} = seat
        std::vector<std::string> key_objects;
        std::vector<std::string> seats;  // empty -> family has no SIT step
        // builds the plan + goal assertions
        int kind;
    };
    const std::vector<Family> families = {
        {"Read book",
         {"I would go find the {0} and open it to start reading in the {1}.",
          "Pick up the {0}, take a seat on the {1} and read for a while.",
          "Go grab the {0}, sit down on the {1} and read."},
         {"novel"},
         {"chair", "stool", "couch"},
         0},
        {"Watch television",
         {"Turn on the television and watch it from the {1}.",
          "I want to switch the television on and sit on the {1} to watch.",
          "Switch on the television, then settle on the {1} and watch the show."},
         {"television"},
         {"couch", "chair", "stool"},
         1},
        {"Work on computer",
         {"Switch the computer on and sit down on the {1} at the desk to work.",
          "Turn on the computer, then take the {1} and start working.",
          "I would boot the computer and sit on the {1} to type."},
         {"computer"},
         {"chair", "stool"},
         2},
        {"Take a rest",
         {"Walk over and sit down on the {1} to rest.",
          "I just want to sit on the {1} and relax for a bit.",
          "Find the {1} and take a seat to rest."},
         {},
         {"couch", "chair", "stool"},
         3},
        {"Go to sleep",
         {"Go to the bed, lie down and sleep.",
          "I would lie on the bed and go to sleep.",
          "Walk to the bedroom, lie down on the bed and sleep."},
         {"bed"},
         {},
         4},
        {"Drink water",
         {"Find the {0}, pick it up and drink the water.",
          "Grab the {0} and take a drink.",
          "I would take the {0} and drink from it."},
         {"glass", "mug"},
         {},
         5},
        {"Check mail",
         {"Find the mail, grab it, open it and read it.",
          "Pick up the mail, open the letter and read what it says.",
          "I would grab the mail and open it to read."},
         {"mail"},
         {},
         6},
        {"Turn on the lamp",
         {"Walk to the lamp and switch it on.",
          "Find the lamp and turn the light on.",
          "I would switch on the lamp to get some light."},
         {"lamp"},
         {},
         7},
        {"Eat an apple",
         {"Open the fridge, take the apple and eat it.",
          "Find the fridge, open it, grab the apple and eat.",
          "I would get the apple from the fridge and eat it."},
         {"apple"},
         {},
         8},
    };

    auto fill = [](std::string text, const std::string& key, const std::string& seat) {
        for (std::string::size_type p; (p = text.find("{0}")) != std::string::npos;)
            text.replace(p, 3, key);
        for (std::string::size_type p; (p = text.find("{1}")) != std::string::npos;)
            text.replace(p, 3, seat);
        return text;
    };

    for (size_t i = 0; i < count; ++i) {
        const Family& fam = families[i % families.size()];
        const std::string key =
            fam.key_objects.empty()
                ? std::string()
                : fam.key_objects[size_t(rng.uniform_int(0, int64_t(fam.key_objects.size()) - 1))];
        const std::string seat =
            fam.seats.empty()
                ? std::string()
                : fam.seats[size_t(rng.uniform_int(0, int64_t(fam.seats.size()) - 1))];

        PlanScenario s;
        s.goal = fam.goal;
        s.instruction = fill(
            fam.instructions[size_t(rng.uniform_int(0, int64_t(fam.instructions.size()) - 1))],
            key, seat);
        s.rooms = default_rooms();
        s.initial_room = s.rooms[size_t(rng.uniform_int(0, int64_t(s.rooms.size()) - 1))];

        // plan objects plus shuffled distractors, desk always present
        std::set<std::string> names;
        if (!key.empty()) names.insert(key);
        if (!seat.empty()) names.insert(seat);
        names.insert("desk");
        if (fam.kind == 8) names.insert("fridge");
        std::vector<ObjectSpec> pool = default_objects();
        rng.shuffle(pool);
        for (const auto& o : pool) {
            if (names.size() >= 8) break;
            names.insert(o.name);
        }
        for (const auto& o : default_objects())
            if (names.count(o.name)) s.objects.push_back(o);

        auto plan = std::vector<std::pair<std::string, std::string>>{};
        auto& g = s.goal_assertions;
        switch (fam.kind) {
            case 0:
                plan = {{"FIND", key}, {"GRAB", key}, {"FIND", seat}, {"SIT", seat},
                        {"READ", key}};
                g = {{"holding", key, true}, {"sitting", "", true}};
                break;
            case 1:
                plan = {{"FIND", "television"}, {"SWITCHON", "television"}, {"FIND", seat},
                        {"SIT", seat}, {"WATCH", "television"}};
                g = {{"on", "television", true}, {"sitting", "", true}};
                break;
            case 2:
                plan = {{"FIND", "computer"}, {"SWITCHON", "computer"}, {"FIND", seat},
                        {"SIT", seat}};
                g = {{"on", "computer", true}, {"sitting", "", true}};
                break;
            case 3:
                plan = {{"FIND", seat}, {"SIT", seat}};
                g = {{"sitting", "", true}};
                break;
            case 4:
                plan = {{"FIND", "bed"}, {"LIE", "bed"}, {"SLEEP", "bed"}};
                g = {{"lying", "", true}};
                break;
            case 5:
                plan = {{"FIND", key}, {"GRAB", key}, {"DRINK", key}};
                g = {{"holding", key, true}};
                break;
            case 6:
                plan = {{"FIND", "mail"}, {"GRAB", "mail"}, {"OPEN", "mail"}, {"READ", "mail"}};
                g = {{"holding", "mail", true}, {"open", "mail", true}};
                break;
            case 7:
                plan = {{"FIND", "lamp"}, {"SWITCHON", "lamp"}};
                g = {{"on", "lamp", true}};
                break;
            case 8:
                plan = {{"FIND", "fridge"}, {"OPEN", "fridge"}, {"FIND", "apple"},
                        {"GRAB", "apple"}, {"EAT", "apple"}};
                g = {{"holding", "apple", true}, {"open", "fridge", true}};
                break;
        }
        s.demo_plan = std::move(plan);
        out.push_back(std::move(s));
    }
    return out;
}

// Renders the decoding prompt for a scenario (object order deterministic in
// listing order; the plan continues right after "Plan: ").
inline std::string plan_prompt(const PlanScenario& s) {
    std::string env = "I am in <" + s.initial_room + ">. Objects: ";
    for (size_t i = 0; i < s.objects.size(); ++i) {
        if (i) env += ", ";
        env += "<" + s.objects[i].name + ">";
    }
    return "Goal: " + s.goal + "\nInstruction: " + s.instruction + "\nEnvironment: " + env +
           "\nPlan: ";
}

// Appendix-style corpus filters: keep executable, state-changing, deduped
// scenarios whose object names are unique.
inline std::vector<PlanScenario> filter_corpus(const std::vector<PlanScenario>& corpus,
                                               const ToolkenVocab& vocab,
                                               const RuleTable& rules = default_rule_table()) {
    std::vector<PlanScenario> kept;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& s : corpus) {
        std::set<std::string> names(s.rooms.begin(), s.rooms.end());
        bool dup_name = false;
        for (const auto& o : s.objects) dup_name |= !names.insert(o.name).second;
        if (dup_name) continue;
        if (!seen.insert({s.goal, s.instruction}).second) continue;
        if (s.demo_plan.empty()) continue;
        PlanOutcome oc = run_plan(s, s.demo_plan, vocab, rules);
        if (!oc.executable) continue;
        MiniHome before(s, rules);
        MiniHome after(s, rules);
        for (const auto& [a, o] : s.demo_plan) after.apply_step(a, o);
        if (after.state() == before.state()) continue;
        kept.push_back(s);
    }
    return kept;
}

}  // namespace toolken
