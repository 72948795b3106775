#include "cvc/causality/causality.hpp"

#include <algorithm>
#include <cmath>

#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/extract/extract.hpp"
#include "cvc/services/protocol.hpp"

namespace cvc::causality {

std::string MaskedCaption::restore() const {
  std::string out = text;
  const auto pos = out.find(services::kMaskPlaceholder);
  if (pos == std::string::npos) return out;
  out.replace(pos, services::kMaskPlaceholder.size(), target);
  return out;
}

MaskedCaption mask_entity(std::string_view caption, const CandidateEntity& entity) {
  if (entity.surface.empty()) throw EntityNotFound("empty entity surface");
  Span span = entity.span;
  const bool span_ok = span.end <= caption.size() && span.size() == entity.surface.size() &&
                       to_lower(caption.substr(span.begin, span.size())) == to_lower(entity.surface);
  if (!span_ok) {
    const auto found = extract::locate_surface(caption, entity.surface);
    if (!found) throw EntityNotFound("entity '" + entity.surface + "' does not occur in the caption");
    span = *found;
  }
  MaskedCaption masked;
  masked.target = std::string(caption.substr(span.begin, span.size()));
  masked.source_span = span;
  masked.text.reserve(caption.size());
  masked.text.append(caption.substr(0, span.begin));
  masked.text.append(services::kMaskPlaceholder);
  masked.text.append(caption.substr(span.end));
  return masked;
}

double aggregate_score(std::span<const double> log_probs) {
  if (log_probs.empty()) throw ProtocolError("/v1/mlm/score response: field 'log_probs' is empty");
  double sum = 0.0;
  for (double lp : log_probs) sum += lp;
  return std::clamp(std::exp(sum / static_cast<double>(log_probs.size())), 0.0, 1.0);
}

ScoredEntity score_entity(services::ServiceClient& client, const MaskedCaption& masked, CandidateEntity entity) {
  auto response = services::mlm_score(client, masked.text, masked.target);
  entity.causality_score = aggregate_score(response.log_probs);
  return {std::move(entity), std::move(response.log_probs)};
}

std::vector<CandidateEntity> filter_entities(const std::vector<CandidateEntity>& entities, const PipelineConfig& cfg,
                                             std::string_view pair_id) {
  std::vector<CandidateEntity> kept;
  if (cfg.mode == EntityMode::random_entity) {
    if (entities.empty()) return kept;
    Rng rng(derive_seed(cfg.seeds.entity, "random_entity", pair_id));
    kept.push_back(entities[static_cast<std::size_t>(uniform_index(rng, entities.size()))]);
    return kept;
  }
  for (const auto& e : entities) {
    if (!e.causality_score) throw ContractViolation("filter_entities: entity '" + e.surface + "' is unscored");
    if (*e.causality_score > cfg.gamma) kept.push_back(e);
  }
  return kept;
}

}  // namespace cvc::causality
