#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"
#include "cvc/services/client.hpp"

namespace cvc::causality {

struct MaskedCaption {
  std::string text;    // caption with exactly one "<MASK_SPAN>"
  std::string target;  // the removed characters, as they appear in the caption
  Span source_span;

  /// Splices target back in place of the placeholder.
  std::string restore() const;
};

/// Masks the occurrence at entity.span, or the first occurrence when the span
/// does not address the surface. Throws EntityNotFound.
MaskedCaption mask_entity(std::string_view caption, const CandidateEntity& entity);

/// exp(mean(log_probs)) clamped to [0,1]: the geometric mean of the subword
/// probabilities. Throws ProtocolError on an empty vector.
double aggregate_score(std::span<const double> log_probs);

struct ScoredEntity {
  CandidateEntity entity;
  std::vector<double> log_probs;
};

ScoredEntity score_entity(services::ServiceClient& client, const MaskedCaption& masked, CandidateEntity entity);

/// Causal mode keeps score > gamma (strict), in input order. Random-entity
/// mode ignores scores and keeps one entity chosen with a seed derived from
/// cfg.seeds.entity and `pair_id`.
std::vector<CandidateEntity> filter_entities(const std::vector<CandidateEntity>& entities, const PipelineConfig& cfg,
                                             std::string_view pair_id);

}  // namespace cvc::causality
