#include "doctest.h"
#include "toolken/core.hpp"

using namespace toolken;

namespace {

ToolSpec func_tool(const std::string& name) {
    ToolSpec spec;
    spec.name = name;
    spec.kind = ToolKind::FunctionWithArgs;
    spec.arg_schema = {{"a", ArgKind::Number}};
    return spec;
}

}  // namespace

TEST_CASE("registration assigns consecutive fused ids above the word vocab") {
    ToolkenVocab vocab(32000);
    CHECK(vocab.register_tool(func_tool("square")) == 32000);
    CHECK(vocab.fused_size() == 32001);

    std::vector<std::string> ops = {"add", "subtract", "multiply", "divide", "power",
                                    "sqrt", "log", "ln", "lcm", "gcd", "remainder",
                                    "choose"};
    FusedId expect = 32001;
    for (const auto& op : ops) CHECK(vocab.register_tool(func_tool(op)) == expect++);
    CHECK(vocab.tool_count() == 13);
}

TEST_CASE("duplicate and malformed names are rejected") {
    ToolkenVocab vocab(100);
    vocab.register_tool(func_tool("square"));
    CHECK_THROWS_AS(vocab.register_tool(func_tool("square")), DataError);
    for (const std::string bad : {"", "has space", "br[acket", "pa)ren", "com,ma", "tab\tname"})
        CHECK_THROWS_AS(vocab.register_tool(func_tool(bad)), DataError);
    CHECK_THROWS_AS(vocab.register_tool(func_tool("N/A")), DataError);
    CHECK_THROWS_AS(vocab.register_tool(func_tool("END")), DataError);
    // schema/kind consistency
    ToolSpec no_args = func_tool("broken");
    no_args.arg_schema.clear();
    CHECK_THROWS_AS(vocab.register_tool(no_args), DataError);
    ToolSpec action;
    action.name = "WALK";
    action.kind = ToolKind::NoArgAction;
    action.arg_schema = {{"x", ArgKind::Number}};
    CHECK_THROWS_AS(vocab.register_tool(action), DataError);
}

TEST_CASE("classify_token partitions the fused space exactly") {
    ToolkenVocab vocab(32000);
    vocab.register_tool(func_tool("square"));
    CHECK(vocab.classify(31999) == ToolkenVocab::TokenClass::Word);
    CHECK(vocab.classify(32000) == ToolkenVocab::TokenClass::Toolken);
    CHECK(vocab.tool_for(32000).name == "square");

    for (int i = 0; i < 12; ++i) vocab.register_tool(func_tool("op" + std::to_string(i)));
    CHECK(vocab.tool_count() == 13);
    CHECK_THROWS_AS(vocab.classify(32013), DataError);
}

TEST_CASE("name and id round-trip for every registered tool") {
    ToolkenVocab vocab(500);
    for (int i = 0; i < 20; ++i) vocab.register_tool(func_tool("tool_" + std::to_string(i)));
    for (size_t j = 0; j < vocab.tool_count(); ++j) {
        const std::string& name = vocab.tool_at(j).name;
        FusedId id = vocab.fused_id_of(name);
        CHECK(id == 500 + j);
        CHECK(vocab.tool_for(id).name == name);
    }
    CHECK(!vocab.lookup("missing"));
}

TEST_CASE("serialization keeps prior tools byte-identical when appending") {
    ToolkenVocab vocab(471);
    vocab.register_tool(func_tool("alpha"));
    vocab.register_tool(func_tool("beta"));
    std::string before = vocab.serialize();

    ToolkenVocab grown = ToolkenVocab::deserialize(before);
    grown.register_tool(func_tool("gamma"));
    std::string after = grown.serialize();

    // prefix up to the closing of the last old tool entry must be unchanged
    size_t cut = before.rfind("}\n  ]");
    REQUIRE(cut != std::string::npos);
    CHECK(after.substr(0, cut + 1) == before.substr(0, cut + 1));

    ToolkenVocab reparsed = ToolkenVocab::deserialize(after);
    CHECK(reparsed.tool_count() == 3);
    CHECK(reparsed.fused_id_of("gamma") == 471 + 2);
}

TEST_CASE("vocab json round-trips demonstrations and schemas") {
    ToolkenVocab vocab(64);
    ToolSpec spec = func_tool("winner_of");
    spec.arg_schema = {{"subject", ArgKind::EntityString}};
    spec.description = "kb relation";
    spec.demonstrations = {{"Question: Who?\nAnswer: The answer is [winner_of](x)=y."}};
    vocab.register_tool(spec);
    vocab.register_end_marker();

    ToolkenVocab back = ToolkenVocab::deserialize(vocab.serialize());
    CHECK(back.tool_count() == 2);
    CHECK(back.tool_at(0).demonstrations.size() == 1);
    CHECK(back.tool_at(0).arg_schema[0].kind == ArgKind::EntityString);
    CHECK(back.tool_at(1).kind == ToolKind::EndMarker);
}

TEST_CASE("frozen vocabs refuse registration") {
    ToolkenVocab vocab(10);
    vocab.register_tool(func_tool("a"));
    vocab.freeze();
    CHECK_THROWS_AS(vocab.register_tool(func_tool("b")), UsageError);
}

TEST_CASE("registry executes bound tools and rejects unbound ones") {
    ToolkenVocab vocab(10);
    vocab.register_tool(func_tool("twice"));
    ToolRegistry registry(std::move(vocab));
    registry.bind("twice", [](const std::vector<ArgValue>& args) {
        return ToolResult{render_number(2 * std::get<double>(args[0])), std::nullopt};
    });
    CHECK(registry.execute("twice", {ArgValue{21.0}}).text == "42");
    CHECK_THROWS_AS(registry.execute("thrice", {}), DataError);
    CHECK_THROWS_AS(registry.bind("thrice", nullptr), DataError);
}
