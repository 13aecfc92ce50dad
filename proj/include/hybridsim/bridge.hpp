#pragma once

// Fine-tuning bridge: recipes rendered into batch jobs, a FirecREST-style
// submit/poll/cancel surface over the batch plane, and checkpoint lineage
// with retention planning.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridsim/batch.hpp"
#include "hybridsim/core.hpp"

namespace hybridsim {

enum class Technique { FullSFT, LoRA, ContextExtension, RLAlignment };
std::string_view to_string(Technique t);
Technique parse_technique(std::string_view s);

struct FineTuneRecipe {
    std::string id;
    std::string base_model;
    Technique technique = Technique::FullSFT;
    int lora_rank = 0;  // LoRA only
    int epochs = 1;
    int nodes = 1;
    int gpus_per_node = 4;
    SimTime est_ms_per_epoch = 0;
    int checkpoint_every_epochs = 1;
    std::string dataset_ref;
    std::string project_id;
    bool blueprint = false;  // curated, safe-by-default configuration
    std::optional<std::string> parent_checkpoint;

    bool valid() const;
};

/// nodes and runtime from the recipe; walltime = ceil(1.2 x base runtime);
/// Large communication iff more than one node. Throws UnknownBaseModel.
BatchJob render_job(const FineTuneRecipe& recipe, const std::map<std::string, ModelProfile>& catalog);

struct Checkpoint {
    std::string id;
    std::optional<std::string> lineage_parent;
    std::string recipe_id;
    JobId job_id = 0;
    int epoch = 0;
    double size_gb = 0.0;
    SimTime created = 0;
    bool referenced = false;
};

struct CheckpointSizing {
    double adapter_gb = 1.0;  // LoRA adapters; full fine-tunes use the base weights size
};

/// One checkpoint per checkpoint_every_epochs boundary plus a final one when
/// the last epoch is not on a boundary, chained by lineage_parent.
std::vector<Checkpoint> register_checkpoints(const BatchJob& job, const FineTuneRecipe& recipe,
                                             const std::map<std::string, ModelProfile>& catalog,
                                             const CheckpointSizing& sizing = {});

struct RetentionPolicy {
    int keep_last_k_per_lineage = 3;
    SimTime min_age_ms = 0;
};

struct GcPlan {
    std::vector<std::string> delete_ids;  // sorted
    double reclaimed_gb = 0.0;
};

/// Lineage of a checkpoint: its topmost ancestor within the set (or the
/// missing parent id where the chain leaves the set).
std::string lineage_root(const std::string& id, const std::map<std::string, const Checkpoint*>& index);

/// Plans deletion of checkpoints that are unreferenced, outside the newest k
/// of their lineage and at least min_age old. Pure; nothing is deleted.
GcPlan gc_plan(const std::vector<Checkpoint>& checkpoints, const RetentionPolicy& policy, SimTime now);

struct PollResult {
    JobState state = JobState::Queued;
    double progress = 0.0;
};

/// Submit/monitor surface over the batch plane. Submissions and cancels go
/// through injectable hooks so a simulation can route them via its event
/// queue; by default they call the plane directly.
class Bridge {
public:
    Bridge(BatchPlane& plane, std::map<std::string, ModelProfile> catalog, std::vector<FineTuneRecipe> recipes);

    void set_submit_hook(std::function<JobId(BatchJob)> hook) { submit_hook_ = std::move(hook); }
    void set_cancel_hook(std::function<void(JobId)> hook) { cancel_hook_ = std::move(hook); }

    JobId submit(BatchJob job, SimTime now);
    /// Renders the catalog recipe and submits it. Throws std::out_of_range
    /// for unknown recipes.
    JobId submit_recipe(const std::string& recipe_id, SimTime now);

    /// Read-only view of the batch state. Throws UnknownJob.
    PollResult poll(JobId id, SimTime now) const;
    void cancel(JobId id, SimTime now);

    const FineTuneRecipe* recipe(const std::string& id) const;
    const FineTuneRecipe* recipe_for_job(JobId id) const;
    const std::map<std::string, FineTuneRecipe>& recipes() const { return recipes_; }
    const std::map<std::string, ModelProfile>& catalog() const { return catalog_; }

private:
    BatchPlane& plane_;
    std::map<std::string, ModelProfile> catalog_;
    std::map<std::string, FineTuneRecipe> recipes_;
    std::map<JobId, std::string> job_recipe_;
    std::function<JobId(BatchJob)> submit_hook_;
    std::function<void(JobId)> cancel_hook_;
};

}  // namespace hybridsim
