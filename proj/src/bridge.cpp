#include "hybridsim/bridge.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(Technique t) {
    switch (t) {
        case Technique::FullSFT: return "FullSFT";
        case Technique::LoRA: return "LoRA";
        case Technique::ContextExtension: return "ContextExtension";
        case Technique::RLAlignment: return "RLAlignment";
    }
    return "?";
}

Technique parse_technique(std::string_view s) {
    if (s == "FullSFT") return Technique::FullSFT;
    if (s == "LoRA") return Technique::LoRA;
    if (s == "ContextExtension") return Technique::ContextExtension;
    if (s == "RLAlignment") return Technique::RLAlignment;
    throw std::invalid_argument("unknown technique '" + std::string(s) + "'");
}

bool FineTuneRecipe::valid() const {
    if (epochs < 1 || nodes < 1 || checkpoint_every_epochs < 1 || est_ms_per_epoch <= 0) return false;
    if (technique == Technique::LoRA && lora_rank < 1) return false;
    return true;
}

BatchJob render_job(const FineTuneRecipe& recipe, const std::map<std::string, ModelProfile>& catalog) {
    if (!catalog.contains(recipe.base_model))
        throw UnknownBaseModel("recipe " + recipe.id + " uses unknown base model " + recipe.base_model);
    if (!recipe.valid()) throw InvalidJob("recipe " + recipe.id + " is malformed");
    BatchJob job;
    job.project_id = recipe.project_id;
    job.nodes_requested = recipe.nodes;
    job.gpus_per_node = recipe.gpus_per_node;
    job.base_runtime_ms = static_cast<SimTime>(recipe.epochs) * recipe.est_ms_per_epoch;
    job.walltime_estimate_ms = (job.base_runtime_ms * 6 + 4) / 5;
    job.comm_class = recipe.nodes > 1 ? CommClass::Large : CommClass::Small;
    job.origin = recipe.id;
    return job;
}

std::vector<Checkpoint> register_checkpoints(const BatchJob& job, const FineTuneRecipe& recipe,
                                             const std::map<std::string, ModelProfile>& catalog,
                                             const CheckpointSizing& sizing) {
    const double full = catalog.at(recipe.base_model).weights_gb;
    const double size = recipe.technique == Technique::LoRA ? sizing.adapter_gb : full;

    std::vector<int> epochs;
    for (int e = recipe.checkpoint_every_epochs; e <= recipe.epochs; e += recipe.checkpoint_every_epochs)
        epochs.push_back(e);
    if (epochs.empty() || epochs.back() != recipe.epochs) epochs.push_back(recipe.epochs);

    std::vector<Checkpoint> out;
    std::optional<std::string> parent = recipe.parent_checkpoint;
    for (int e : epochs) {
        Checkpoint c;
        c.id = "ckpt-" + std::to_string(job.id) + "-e" + std::to_string(e);
        c.lineage_parent = parent;
        c.recipe_id = recipe.id;
        c.job_id = job.id;
        c.epoch = e;
        c.size_gb = size;
        // Written when the epoch finishes; a timed-out job still stamps at its end.
        c.created = std::min(job.end_time, job.start_time + (job.end_time - job.start_time) * e / recipe.epochs);
        parent = c.id;
        out.push_back(std::move(c));
    }
    return out;
}

std::string lineage_root(const std::string& id, const std::map<std::string, const Checkpoint*>& index) {
    std::string cur = id;
    std::set<std::string> seen;
    for (;;) {
        auto it = index.find(cur);
        if (it == index.end()) return cur;
        const auto& parent = it->second->lineage_parent;
        if (!parent || !seen.insert(cur).second) return cur;
        cur = *parent;
    }
}

GcPlan gc_plan(const std::vector<Checkpoint>& checkpoints, const RetentionPolicy& policy, SimTime now) {
    std::map<std::string, const Checkpoint*> index;
    for (const auto& c : checkpoints) index[c.id] = &c;

    std::map<std::string, std::vector<const Checkpoint*>> lineages;
    for (const auto& c : checkpoints) lineages[lineage_root(c.id, index)].push_back(&c);

    GcPlan plan;
    const auto keep = static_cast<std::size_t>(std::max(policy.keep_last_k_per_lineage, 1));
    for (auto& [_, members] : lineages) {
        std::sort(members.begin(), members.end(), [](const Checkpoint* a, const Checkpoint* b) {
            if (a->created != b->created) return a->created > b->created;
            if (a->epoch != b->epoch) return a->epoch > b->epoch;
            return a->id > b->id;
        });
        for (std::size_t i = keep; i < members.size(); ++i) {
            const Checkpoint* c = members[i];
            if (c->referenced || now - c->created < policy.min_age_ms) continue;
            plan.delete_ids.push_back(c->id);
            plan.reclaimed_gb += c->size_gb;
        }
    }
    std::sort(plan.delete_ids.begin(), plan.delete_ids.end());
    return plan;
}

Bridge::Bridge(BatchPlane& plane, std::map<std::string, ModelProfile> catalog, std::vector<FineTuneRecipe> recipes)
    : plane_(plane), catalog_(std::move(catalog)) {
    for (auto& r : recipes) {
        const auto id = r.id;
        recipes_.emplace(id, std::move(r));
    }
}

JobId Bridge::submit(BatchJob job, SimTime now) {
    const std::string origin = job.origin;
    const JobId id = submit_hook_ ? submit_hook_(std::move(job)) : plane_.submit(std::move(job), now);
    if (!origin.empty() && recipes_.contains(origin)) job_recipe_[id] = origin;
    return id;
}

JobId Bridge::submit_recipe(const std::string& recipe_id, SimTime now) {
    auto it = recipes_.find(recipe_id);
    if (it == recipes_.end()) throw std::out_of_range("unknown recipe " + recipe_id);
    return submit(render_job(it->second, catalog_), now);
}

PollResult Bridge::poll(JobId id, SimTime now) const {
    const BatchJob& j = plane_.job(id);
    PollResult r{j.state, 0.0};
    switch (j.state) {
        case JobState::Queued: break;
        case JobState::Running: {
            const SimTime span = j.end_time - j.start_time;
            r.progress = span <= 0 ? 1.0
                                   : std::clamp(static_cast<double>(now - j.start_time) / static_cast<double>(span),
                                                0.0, 1.0);
            break;
        }
        case JobState::Completed: r.progress = 1.0; break;
        case JobState::Cancelled: break;
    }
    return r;
}

void Bridge::cancel(JobId id, SimTime now) {
    (void)plane_.job(id);
    if (cancel_hook_)
        cancel_hook_(id);
    else
        plane_.cancel(id, now);
}

const FineTuneRecipe* Bridge::recipe(const std::string& id) const {
    auto it = recipes_.find(id);
    return it == recipes_.end() ? nullptr : &it->second;
}

const FineTuneRecipe* Bridge::recipe_for_job(JobId id) const {
    auto it = job_recipe_.find(id);
    return it == job_recipe_.end() ? nullptr : recipe(it->second);
}

}  // namespace hybridsim
