#include <doctest.h>

#include <filesystem>

#include "joda/error.hpp"
#include "joda/schema.hpp"
#include "joda/templates.hpp"
#include "joda/vlm.hpp"
#include "support/fixtures.hpp"

using namespace joda;
using testsupport::fixture;
using testsupport::read_file;

namespace {

std::string openai_reply(const std::string& text) {
  return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

JointContext door() { return parse_context(read_file(fixture("context_door.json"))); }

PromptBundle door_bundle() { return build_prompt(door(), load_image_dir(fixture("images")), ProposalMode::kTemplate); }

std::string door_proposal() { return read_file(fixture("proposals/p01_door_soft_close.json")); }

}  // namespace

TEST_SUITE("vlm") {
  TEST_CASE("fence stripping and completion token") {
    CHECK(strip_code_fences("```json\n{\"a\": 1}\n```") == "{\"a\": 1}");
    CHECK(strip_code_fences("Here you go: {\"a\": {\"b\": 2}} hope it helps") == "{\"a\": {\"b\": 2}}");
    CHECK(strip_code_fences("{\"a\": 1}") == "{\"a\": 1}");
    CHECK(is_complete_token("complete"));
    CHECK(is_complete_token("  \"Complete.\"\n"));
    CHECK(is_complete_token("```\ncomplete\n```"));
    CHECK_FALSE(is_complete_token("not complete"));
    CHECK_FALSE(is_complete_token("{\"complete\": true}"));
  }

  TEST_CASE("base64") {
    CHECK(base64_encode("") == "");
    CHECK(base64_encode("f") == "Zg==");
    CHECK(base64_encode("foobar") == "Zm9vYmFy");
    const auto imgs = load_image_dir(fixture("images"));
    REQUIRE(imgs.size() == 3);
    CHECK(imgs[0].name == "state_0.png");
    CHECK(imgs[0].media_type == "image/png");
    CHECK_THROWS_AS(load_image(fixture("images/missing.png")), Error);
  }

  TEST_CASE("prompt is deterministic and lists the library") {
    const auto a = door_bundle();
    const auto b = door_bundle();
    CHECK(a.system == b.system);
    CHECK(a.user == b.user);
    for (const auto& t : list_templates()) CHECK(a.user.find(t.name) != std::string::npos);
    CHECK(a.user.find("door_hinge") != std::string::npos);
    CHECK_THROWS_AS(build_prompt(door(), {}, ProposalMode::kTemplate), Error);
    CHECK(build_prompt(door(), {}, ProposalMode::kTemplate, true).images.empty());
  }

  TEST_CASE("feedback carries the prior proposal verbatim") {
    Feedback fb;
    fb.prior_proposal = door_proposal();
    fb.profile_csv = "s,f_cons\n0,1\n";
    fb.analysis = nlohmann::json{{"equilibria", nlohmann::json::array()}};
    const std::string msg = feedback_message(fb, ProposalMode::kTemplate);
    CHECK(msg.find(fb.prior_proposal) != std::string::npos);
    CHECK(msg.find(fb.profile_csv) != std::string::npos);
  }

  TEST_CASE("wire formats") {
    const auto openai = make_backend("openai");
    const auto gemini = make_backend("gemini");
    CHECK_THROWS_AS(make_backend("carrier_pigeon"), Error);
    const auto msgs = initial_conversation(door_bundle());
    ChatOptions opts;
    opts.model = "m";
    opts.api_key = "k";
    const auto req = openai->build_request(msgs, opts);
    const auto body = nlohmann::json::parse(req.body);
    CHECK(body["temperature"] == 0);
    CHECK(body["model"] == "m");
    CHECK(openai->extract_text(openai_reply("hi")) == "hi");
    const std::string gem = R"({"candidates":[{"content":{"parts":[{"text":"a"},{"text":"b"}]}}]})";
    CHECK(gemini->extract_text(gem) == "ab");
    CHECK_THROWS_AS(openai->extract_text("{\"error\": {\"message\": \"quota\"}}"), Error);
    opts.max_request_bytes = 100;
    ReplayTransport transport({openai_reply("complete")});
    auto conv = msgs;
    CHECK_THROWS_AS(propose(conv, *openai, opts, transport, ProposalMode::kTemplate, 0, true), Error);
    CHECK(transport.requests().empty());
  }

  TEST_CASE("a malformed reply is repaired once") {
    ReplayTransport transport({openai_reply("I think it is a door."), openai_reply(door_proposal())});
    const auto backend = make_backend("openai");
    auto conv = initial_conversation(door_bundle());
    const auto out = propose(conv, *backend, ChatOptions{}, transport, ProposalMode::kTemplate, 2, false);
    CHECK(out.retries == 1);
    REQUIRE(out.proposal.has_value());
    CHECK(out.proposal->effect_proposals.size() == 3);
    CHECK(out.exchanges.size() == 2);
    CHECK(transport.remaining() == 0);
  }

  TEST_CASE("retry budget is enforced") {
    ReplayTransport transport({openai_reply("nope"), openai_reply("still nope")});
    const auto backend = make_backend("openai");
    bool unparseable = false;
    try {
      propose(door_bundle(), *backend, ChatOptions{}, transport, 1);
    } catch (const Error& e) {
      unparseable = e.code() == ErrorCode::kUnparseableProposal;
    }
    CHECK(unparseable);
  }

  TEST_CASE("complete on the second round stops the loop") {
    ReplayTransport transport({openai_reply(door_proposal()), openai_reply("complete"), openai_reply(door_proposal())});
    const auto backend = make_backend("openai");
    const auto res = iterate(door(), door_bundle(), *backend, ChatOptions{}, transport, IterationPolicy{});
    CHECK(res.completed);
    CHECK(res.rounds.size() == 2);
    CHECK(transport.remaining() == 1);
    REQUIRE(res.field.has_value());
    CHECK(serialize_composed(*res.field) == read_file(fixture("golden/door_composed.json")));
    // Second request carries the first proposal back to the model.
    const auto second = nlohmann::json::parse(transport.requests().at(1)).dump();
    CHECK(second.find("magnetic_return_to_low_end") != std::string::npos);
  }

  TEST_CASE("max_rounds caps the compiles") {
    ReplayTransport transport({openai_reply(door_proposal()), openai_reply(door_proposal())});
    const auto backend = make_backend("openai");
    IterationPolicy policy;
    policy.max_rounds = 1;
    const auto res = iterate(door(), door_bundle(), *backend, ChatOptions{}, transport, policy);
    CHECK(res.rounds.size() == 1);
    CHECK_FALSE(res.completed);
    CHECK(transport.remaining() == 1);
  }

  TEST_CASE("transcript layout") {
    const auto dir = testsupport::scratch_dir("transcript");
    ReplayTransport transport = ReplayTransport::from_file(fixture("conversation/responses.json"));
    const auto backend = make_backend("openai");
    const auto res = iterate(door(), door_bundle(), *backend, ChatOptions{}, transport, IterationPolicy{}, dir);
    CHECK(res.rounds.size() == 3);
    for (const char* f : {"request.json", "response.json", "proposal.json", "composed.json", "profile.svg", "profile.csv"}) {
      CHECK(std::filesystem::exists(dir / "door_hinge" / "round1" / f));
      CHECK(std::filesystem::exists(dir / "door_hinge" / "round2" / f));
    }
    CHECK(read_file(dir / "door_hinge" / "round2" / "composed.json") == read_file(fixture("conversation/final_composed.json")));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("missing API key") {
    ::unsetenv("JODA_API_KEY");
    CHECK_THROWS_AS(api_key_from_env(), Error);
  }
}
