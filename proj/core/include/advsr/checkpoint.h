#ifndef ADVSR_CHECKPOINT_H_
#define ADVSR_CHECKPOINT_H_

#include <filesystem>

#include "advsr/model.h"

namespace advsr::model {

// Binary container:
//   "ADVSRCKP" | u32 version | u64 header bytes | JSON header | f64 blobs
// The header carries id, arch, vocabulary, feature config, provenance and
// the ordered parameter table (name, rows, cols). Blobs follow in table
// order as little-endian IEEE-754 doubles, so round trips are bitwise.
void save_checkpoint(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace advsr::model

#endif  // ADVSR_CHECKPOINT_H_
