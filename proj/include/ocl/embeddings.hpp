#pragma once

#include <filesystem>
#include <string>

#include "ocl/cohort.hpp"
#include "ocl/model.hpp"
#include "ocl/training.hpp"

namespace ocl {

struct EmbeddedRecords {
  RecordSet records;
  Matrix embeddings;  // one unit-norm row per record
};

/// Every observed (subject, modality) of `cohort`, in subject then modality order.
EmbeddedRecords embed_cohort(const Cohort& cohort, const Encoder& encoder);

/// Columns: subject_id,modality,label,z_0..z_{m-1}.
std::string embeddings_csv(const Cohort& cohort, const Encoder& encoder);
void export_embeddings(const Cohort& cohort, const Encoder& encoder,
                       const std::filesystem::path& path);

}  // namespace ocl
