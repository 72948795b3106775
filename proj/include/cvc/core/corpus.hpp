#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cvc/core/config.hpp"
#include "cvc/core/types.hpp"

namespace cvc {

/// Reads a COCO-captions document (images[] with id/file_name, annotations[]
/// with id/image_id/caption) and resolves every selected pair's image under
/// image_root.
std::vector<ImageCaptionPair> load_corpus(const std::filesystem::path& captions_file,
                                          const std::filesystem::path& image_root,
                                          const PipelineConfig& cfg);

std::string make_pair_id(long long image_id, long long annotation_id);

}  // namespace cvc
