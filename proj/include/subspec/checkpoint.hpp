#ifndef SUBSPEC_CHECKPOINT_HPP_
#define SUBSPEC_CHECKPOINT_HPP_

#include <string>

#include "subspec/model.hpp"
#include "subspec/norm.hpp"

namespace subspec {

// Serialized layer/model state: a JSON manifest holding configuration plus
// TNS4 blobs for every parameter array.

struct NormLayerState {
  std::string kind = "ssn";  // "ssn" (covers BN at s=1) or "bnsub"
  SsnConfig cfg;
  SsnParams params;
  SsnRunningStats stats;
};

// Writes <dir>/<prefix>.json plus <prefix>_*.tns4 blobs.
void save_norm_layer(const std::string& dir, const std::string& prefix,
                     const NormLayerState& layer);
NormLayerState load_norm_layer(const std::string& dir, const std::string& prefix);

// Whole-model checkpoint under <dir>/checkpoint.json.
void save_checkpoint(const std::string& dir, const Model& model);
Model load_checkpoint(const std::string& dir);

}  // namespace subspec

#endif  // SUBSPEC_CHECKPOINT_HPP_
