#include "rtlevo/validation.hpp"

#include "rtlevo/error.hpp"
#include "rtlevo/scoring.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <unistd.h>

namespace rtlevo {

std::string to_string(JobStatus s)
{
    switch (s) {
    case JobStatus::pending: return "pending";
    case JobStatus::published: return "published";
    case JobStatus::rejected: return "rejected";
    }
    return "pending";
}

JobStatus job_status_from_string(std::string_view s)
{
    if (s == "pending") return JobStatus::pending;
    if (s == "published") return JobStatus::published;
    if (s == "rejected") return JobStatus::rejected;
    throw ParseError("unknown job status '" + std::string(s) + "'");
}

void to_json(json& j, const ValidationThresholds& t)
{
    j = json{{"min_results", t.min_results}, {"min_approvals", t.min_approvals},
             {"min_mean_quality", t.min_mean_quality}};
}

void from_json(const json& j, ValidationThresholds& t)
{
    t.min_results = j.at("min_results").get<int>();
    t.min_approvals = j.at("min_approvals").get<int>();
    t.min_mean_quality = j.at("min_mean_quality").get<double>();
}

void to_json(json& j, const ReplayCase& c)
{
    j = json{{"session_id", c.session_id}, {"task_spec", c.task_spec_path}, {"evaluator_config", c.evaluator_config_path}};
}

void from_json(const json& j, ReplayCase& c)
{
    c.session_id = j.value("session_id", "");
    c.task_spec_path = j.at("task_spec").get<std::string>();
    c.evaluator_config_path = j.value("evaluator_config", "");
}

void to_json(json& j, const ValidatorResult& r)
{
    j = json{{"schema_version", kSchemaVersion},
             {"worker_id", r.worker_id},
             {"approved", r.approved},
             {"candidate_quality", r.candidate_quality},
             {"baseline_quality", r.baseline_quality},
             {"cases_replayed", r.cases_replayed},
             {"notes", r.notes}};
}

void from_json(const json& j, ValidatorResult& r)
{
    r.worker_id = j.at("worker_id").get<std::string>();
    r.approved = j.at("approved").get<bool>();
    r.candidate_quality = j.at("candidate_quality").get<double>();
    r.baseline_quality = j.at("baseline_quality").get<double>();
    r.cases_replayed = j.at("cases_replayed").get<int>();
    r.notes = j.value("notes", std::vector<std::string>{});
}

void to_json(json& j, const ValidationJob& v)
{
    j = json{{"schema_version", kSchemaVersion},
             {"job_id", v.job_id},
             {"skill_id", v.skill_id},
             {"create", v.create},
             {"baseline_text", v.baseline_text},
             {"candidate_text", v.candidate_text},
             {"replay_cases", v.replay_cases},
             {"thresholds", v.thresholds},
             {"status", to_string(v.status)},
             {"status_reason", v.status_reason}};
}

void from_json(const json& j, ValidationJob& v)
{
    v.job_id = j.at("job_id").get<std::string>();
    v.skill_id = j.at("skill_id").get<std::string>();
    v.create = j.value("create", false);
    v.baseline_text = j.value("baseline_text", "");
    v.candidate_text = j.at("candidate_text").get<std::string>();
    v.replay_cases = j.at("replay_cases").get<std::vector<ReplayCase>>();
    v.thresholds = j.at("thresholds").get<ValidationThresholds>();
    v.status = job_status_from_string(j.at("status").get<std::string>());
    v.status_reason = j.value("status_reason", "");
}

void validate_job(const ValidationJob& job)
{
    if (job.job_id.empty() || job.job_id.find('/') != std::string::npos || job.job_id.front() == '.')
        throw PreconditionError("invalid job id '" + job.job_id + "'");
    if (job.skill_id.empty())
        throw PreconditionError("job " + job.job_id + " has no skill id");
    if (job.replay_cases.empty())
        throw PreconditionError("job " + job.job_id + " has no replay cases");
    if (job.replay_cases.size() > static_cast<std::size_t>(kMaxReplayCases))
        throw PreconditionError("job " + job.job_id + " has " + std::to_string(job.replay_cases.size()) +
                                " replay cases (max " + std::to_string(kMaxReplayCases) + ")");
    if (job.candidate_text.empty())
        throw PreconditionError("job " + job.job_id + " has no candidate text");
    if (job.create != job.baseline_text.empty())
        throw PreconditionError("job " + job.job_id + ": baseline text must be empty exactly for create jobs");
    if (job.status != JobStatus::pending)
        throw PreconditionError("job " + job.job_id + " is not pending");
}

namespace {

fs::path job_dir(const fs::path& queue, const std::string& id) { return queue / id; }
fs::path job_doc(const fs::path& queue, const std::string& id) { return queue / id / "job.doc"; }

void save_job(const fs::path& queue, const ValidationJob& job)
{
    write_file_atomic(job_doc(queue, job.job_id), dump_text(json(job), 2) + "\n");
}

} // namespace

std::string enqueue(const ValidationJob& job, const fs::path& queue)
{
    validate_job(job);
    try {
        fs::create_directories(queue);
    } catch (const fs::filesystem_error& e) {
        throw StorageError(std::string("queue unwritable: ") + e.what());
    }
    FileLock lock(queue / ".enqueue.lock");
    if (job_exists(queue, job.job_id))
        throw PreconditionError("duplicate job id '" + job.job_id + "'");
    fs::create_directories(job_dir(queue, job.job_id));
    ValidationJob stored = job;
    stored.results.clear();
    save_job(queue, stored);
    return job.job_id;
}

bool job_exists(const fs::path& queue, const std::string& job_id) { return fs::exists(job_doc(queue, job_id)); }

ValidationJob load_job(const fs::path& queue, const std::string& job_id)
{
    ValidationJob job;
    try {
        json::parse(read_file(job_doc(queue, job_id))).get_to(job);
    } catch (const json::exception& e) {
        throw ParseError("job " + job_id + ": " + e.what());
    }
    std::vector<fs::path> files;
    for (auto& e : fs::directory_iterator(job_dir(queue, job_id))) {
        auto name = e.path().filename().string();
        if (name.rfind("result.", 0) == 0 && name.size() > 11 && name.substr(name.size() - 4) == ".doc")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) {
        try {
            job.results.push_back(json::parse(read_file(f)).get<ValidatorResult>());
        } catch (const json::exception& e) {
            throw ParseError(f.string() + ": " + e.what());
        }
    }
    return job;
}

std::vector<std::string> list_jobs(const fs::path& queue)
{
    std::vector<std::string> ids;
    if (!fs::is_directory(queue))
        return ids;
    for (auto& e : fs::directory_iterator(queue))
        if (e.is_directory() && fs::exists(e.path() / "job.doc"))
            ids.push_back(e.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

JobClaim::JobClaim(const fs::path& queue, const std::string& job_id, const std::string& worker_id)
    : path_(queue / job_id / "claim")
{
    held_ = create_exclusive(path_, worker_id + "\n");
}

JobClaim::~JobClaim()
{
    if (held_)
        ::unlink(path_.c_str());
}

bool append_result(const fs::path& queue, const std::string& job_id, const ValidatorResult& r)
{
    if (r.worker_id.empty() || r.worker_id.find('/') != std::string::npos)
        throw PreconditionError("invalid worker id '" + r.worker_id + "'");
    return create_exclusive(queue / job_id / ("result." + r.worker_id + ".doc"), dump_text(json(r), 2) + "\n");
}

double replay_quality(bool passed, double score, double p_max)
{
    if (passed)
        return 1.0;
    if (p_max <= 0.0)
        return 0.0;
    return std::clamp(1.0 - score / p_max, 0.0, 1.0);
}

bool approve(double candidate_quality, double baseline_quality, const ValidationThresholds& t)
{
    return candidate_quality >= baseline_quality && candidate_quality > t.min_mean_quality;
}

PublishVerdict publish_decision(const std::vector<ValidatorResult>& results, const ValidationThresholds& t)
{
    const int n = static_cast<int>(results.size());
    if (n < t.min_results)
        return {JobStatus::pending, std::to_string(n) + " of " + std::to_string(t.min_results) + " results"};
    int approvals = 0;
    double sum = 0.0;
    for (auto& r : results) {
        approvals += r.approved ? 1 : 0;
        sum += r.candidate_quality;
    }
    double mean = sum / n;
    if (approvals < t.min_approvals)
        return {JobStatus::rejected, std::to_string(approvals) + " approvals < " + std::to_string(t.min_approvals)};
    if (mean < t.min_mean_quality)
        return {JobStatus::rejected, "mean quality " + std::to_string(mean) + " < " + std::to_string(t.min_mean_quality)};
    return {JobStatus::published, std::to_string(approvals) + " approvals, mean quality " + std::to_string(mean)};
}

namespace {

struct ReplayOutcome {
    double quality = 0.0;
    std::string note;
};

EvaluatorConfig case_evaluator(const ReplayCase& c, const WorkerOptions& opt, std::vector<std::string>& notes)
{
    EvaluatorConfig cfg = opt.fallback_evaluator;
    if (!c.evaluator_config_path.empty() && fs::exists(c.evaluator_config_path)) {
        try {
            json j = json::parse(read_file(c.evaluator_config_path));
            cfg = (j.contains("evaluator") ? j.at("evaluator") : j).get<EvaluatorConfig>();
        } catch (const std::exception& e) {
            notes.push_back("evaluator config " + c.evaluator_config_path + " unreadable, using fallback: " + e.what());
            cfg = opt.fallback_evaluator;
        }
    }
    cfg.enabled = {kFunctional};
    return cfg;
}

ReplayOutcome replay_side(const TaskSpec& task, const EvaluatorConfig& cfg, const std::optional<SkillFile>& skill,
                          const std::string& side, Provider& provider, const WorkerOptions& opt,
                          const fs::path& scratch)
{
    PromptInputs in;
    in.task = &task;
    if (skill)
        in.skills.push_back(*skill);
    in.key = task.task_id + "/replay-" + side;
    in.temperature = 0.0;
    in.repair_temperature = 0.0;
    std::string rtl;
    try {
        auto prompt = build_generation_prompt(in, opt.templates);
        rtl = extract_rtl(provider.generate(prompt), task.module_header);
    } catch (const ProviderError& e) {
        return {0.0, side + " " + task.task_id + ": provider error: " + e.what()};
    } catch (const ExtractionError&) {
        return {0.0, side + " " + task.task_id + ": no module in output"};
    }
    fs::create_directories(scratch);
    auto evaluators = make_evaluators(cfg);
    PoolOutput out;
    try {
        out = run_pool(rtl, task, VersionId{0, 1}, cfg, scratch, evaluators);
    } catch (const std::exception& e) {
        return {0.0, side + " " + task.task_id + ": evaluation error: " + e.what()};
    }
    ScoreConfig sc = preset(ScoreMode::correctness_only);
    auto s = score_open(out.results, sc);
    const EvaluatorResult* f = nullptr;
    for (auto& r : out.results)
        if (r.evaluator == kFunctional)
            f = &r;
    if (!f || f->outcome == Outcome::tool_unavailable)
        return {0.0, side + " " + task.task_id + ": functional evaluator unavailable"};
    return {replay_quality(f->passed, s.score, max_functional_penalty(sc)), {}};
}

std::optional<SkillFile> skill_from_text(const std::string& text)
{
    if (text.empty())
        return std::nullopt;
    return parse_skill(text);
}

} // namespace

ValidatorResult replay_job(const ValidationJob& job, Provider& provider, const WorkerOptions& opt,
                           const fs::path& scratch)
{
    ValidatorResult r;
    r.worker_id = opt.worker_id;
    auto baseline = skill_from_text(job.baseline_text);
    auto candidate = skill_from_text(job.candidate_text);

    const int n = static_cast<int>(job.replay_cases.size());
    const int take = std::min(kCasesPerWorker, n);
    // Later workers start where earlier ones stopped.
    const int offset = static_cast<int>((job.results.size() * kCasesPerWorker) % static_cast<std::size_t>(n));
    double cq = 0.0;
    double bq = 0.0;
    for (int i = 0; i < take; ++i) {
        const ReplayCase& c = job.replay_cases[static_cast<std::size_t>((offset + i) % n)];
        TaskSpec task;
        try {
            task = load_task_spec(c.task_spec_path);
        } catch (const std::exception& e) {
            r.notes.push_back("case " + c.task_spec_path + " unreadable: " + e.what());
            ++r.cases_replayed;
            continue;
        }
        EvaluatorConfig cfg = case_evaluator(c, opt, r.notes);
        fs::path dir = scratch / ("case" + std::to_string(i));
        auto b = replay_side(task, cfg, baseline, "baseline", provider, opt, dir / "baseline");
        auto k = replay_side(task, cfg, candidate, "candidate", provider, opt, dir / "candidate");
        for (auto* o : {&b, &k})
            if (!o->note.empty())
                r.notes.push_back(o->note);
        bq += b.quality;
        cq += k.quality;
        ++r.cases_replayed;
    }
    r.candidate_quality = cq / r.cases_replayed;
    r.baseline_quality = bq / r.cases_replayed;
    r.approved = approve(r.candidate_quality, r.baseline_quality, job.thresholds);
    return r;
}

std::vector<WorkerReport> worker_process(const fs::path& queue, Provider& provider, const WorkerOptions& opt)
{
    if (opt.worker_id.empty())
        throw ConfigError("worker id is required");
    std::vector<WorkerReport> done;
    for (auto& id : list_jobs(queue)) {
        if (static_cast<int>(done.size()) >= opt.max_jobs)
            break;
        if (fs::exists(queue / id / ("result." + opt.worker_id + ".doc")))
            continue;
        JobClaim claim(queue, id, opt.worker_id);
        if (!claim.held())
            continue;
        ValidationJob job = load_job(queue, id);
        if (job.status != JobStatus::pending)
            continue;
        bool judged = std::any_of(job.results.begin(), job.results.end(),
                                  [&](auto& r) { return r.worker_id == opt.worker_id; });
        if (judged)
            continue;
        fs::path scratch = opt.scratch.empty() ? queue / id / ("work." + opt.worker_id) : opt.scratch / id;
        ValidatorResult r = replay_job(job, provider, opt, scratch);
        if (append_result(queue, id, r))
            done.push_back({id, r});
    }
    return done;
}

std::vector<PublishReport> publish(const fs::path& queue, SkillLibrary& lib)
{
    std::vector<PublishReport> out;
    if (!fs::is_directory(queue))
        return out;
    FileLock lock(queue / ".publish.lock");
    for (auto& id : list_jobs(queue)) {
        ValidationJob job = load_job(queue, id);
        PublishReport rep;
        rep.job_id = id;
        rep.skill_id = job.skill_id;
        rep.results = static_cast<int>(job.results.size());
        for (auto& r : job.results) {
            rep.approvals += r.approved ? 1 : 0;
            rep.mean_quality += r.candidate_quality;
        }
        if (rep.results > 0)
            rep.mean_quality /= rep.results;
        if (job.status != JobStatus::pending) {
            rep.status = job.status;
            rep.reason = job.status_reason;
            out.push_back(rep);
            continue;
        }
        auto verdict = publish_decision(job.results, job.thresholds);
        rep.status = verdict.status;
        rep.reason = verdict.reason;
        if (verdict.status == JobStatus::published) {
            try {
                write_skill(lib, parse_skill(job.candidate_text), PublicationMode::validated);
            } catch (const std::exception& e) {
                rep.status = JobStatus::pending;
                rep.reason = std::string("registry write failed: ") + e.what();
                out.push_back(rep);
                continue;
            }
        }
        if (verdict.status != JobStatus::pending) {
            job.status = verdict.status;
            job.status_reason = verdict.reason;
            save_job(queue, job);
            rep.changed = true;
        }
        out.push_back(rep);
    }
    return out;
}

} // namespace rtlevo
