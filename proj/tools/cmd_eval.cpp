// pope-eval, chair-eval and hi-eval subcommands.

#include "cli_common.hpp"
#include "tpc/analysis.hpp"

namespace tpc::cli {

namespace {

double accuracy_from(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidInput, "cannot open " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  if (!j.is_object() || !j.contains("accuracy") || !j["accuracy"].is_number()) {
    throw Error(Errc::InvalidInput, path + " has no numeric accuracy field");
  }
  return j["accuracy"].get<double>();
}

}  // namespace

void register_pope_eval(CLI::App& app) {
  auto* sub = app.add_subcommand("pope-eval", "Accuracy/precision/recall/F1 of yes/no answers");
  auto records_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--records", *records_path, "JSONL {id, label, predicted_text}")->required();
  sub->add_option("--out", *out_path, "JSON file (default stdout)");
  sub->callback([=] {
    const PopeScores s = pope_score(read_eval_records(*records_path));
    for (const auto& message : s.warnings) warn(message);
    Output out(*out_path);
    out.stream() << nlohmann::json{{"accuracy", s.accuracy}, {"precision", s.precision}, {"recall", s.recall},
                                   {"f1", s.f1},             {"tp", s.tp},               {"fp", s.fp},
                                   {"tn", s.tn},             {"fn", s.fn},               {"unparseable", s.unparseable},
                                   {"total", s.total},       {"warnings", s.warnings}}
                        .dump(2)
                 << '\n';
  });
}

void register_chair_eval(CLI::App& app) {
  auto* sub = app.add_subcommand("chair-eval", "Object hallucination rates of captions");
  auto records_path = std::make_shared<std::string>();
  auto synonyms_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--records", *records_path, "JSONL {id, caption_objects, ground_truth_objects}")->required();
  sub->add_option("--synonyms", *synonyms_path, "JSON synonym map");
  sub->add_option("--out", *out_path, "JSON file (default stdout)");
  sub->callback([=] {
    const SynonymMap synonyms = synonyms_path->empty() ? SynonymMap{} : read_synonyms(*synonyms_path);
    const ChairScores s = chair(read_caption_records(*records_path, synonyms), synonyms);
    Output out(*out_path);
    out.stream() << nlohmann::json{{"chair_i", s.chair_i},
                                   {"chair_s", s.chair_s},
                                   {"hallucinated_objects", s.hallucinated_objects},
                                   {"mentioned_objects", s.mentioned_objects},
                                   {"hallucinated_captions", s.hallucinated_captions},
                                   {"captions", s.captions}}
                        .dump(2)
                 << '\n';
  });
}

void register_hi_eval(CLI::App& app) {
  auto* sub = app.add_subcommand("hi-eval", "Accuracy drop caused by a hallucination-inducing prompt");
  auto origin = std::make_shared<std::string>();
  auto hallu = std::make_shared<std::string>();
  auto origin_acc = std::make_shared<std::optional<double>>();
  auto hallu_acc = std::make_shared<std::optional<double>>();
  auto out_path = std::make_shared<std::string>();
  sub->add_option("--origin", *origin, "pope-eval output on the original prompts");
  sub->add_option("--hallu", *hallu, "pope-eval output on the induced prompts");
  sub->add_option("--origin-acc", *origin_acc, "original accuracy, instead of --origin");
  sub->add_option("--hallu-acc", *hallu_acc, "induced accuracy, instead of --hallu");
  sub->add_option("--out", *out_path, "JSON file (default stdout)");
  sub->callback([=] {
    if (origin->empty() == !origin_acc->has_value() || hallu->empty() == !hallu_acc->has_value()) {
      throw Error(Errc::InvalidConfig, "give exactly one of --origin/--origin-acc and of --hallu/--hallu-acc");
    }
    const double a = origin_acc->has_value() ? **origin_acc : accuracy_from(*origin);
    const double b = hallu_acc->has_value() ? **hallu_acc : accuracy_from(*hallu);
    Output out(*out_path);
    out.stream() << nlohmann::json{{"acc_origin", a}, {"acc_hallu", b}, {"hi", hi_score(a, b)}}.dump(2) << '\n';
  });
}

}  // namespace tpc::cli
