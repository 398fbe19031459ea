#include "fewshot/pipeline_config.hpp"

#include "fewshot/errors.hpp"

namespace fewshot {

std::string method_name(const PipelineConfig& config) {
  if (config.use_AS && config.use_E) return "EASY";
  if (config.use_AS) return "ASY";
  if (config.use_E) return "EY";
  return "Y";
}

const char* to_string(Mode mode) {
  return mode == Mode::Inductive ? "inductive" : "transductive";
}

Mode parse_mode(const std::string& text) {
  if (text == "inductive") return Mode::Inductive;
  if (text == "transductive") return Mode::Transductive;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + text + "' (expected inductive or transductive)");
}

}  // namespace fewshot
