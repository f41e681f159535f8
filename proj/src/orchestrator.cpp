#include "chatdit/orchestrator.hpp"

#include <iostream>

#include "chatdit/errors.hpp"
#include "chatdit/session.hpp"

namespace chatdit {
namespace {

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const ContractError*>(&e)) return "contract";
  if (dynamic_cast<const BackendError*>(&e)) return "backend";
  if (dynamic_cast<const ProtocolError*>(&e)) return "protocol";
  if (dynamic_cast<const InputError*>(&e)) return "input";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  if (dynamic_cast<const PersistenceError*>(&e)) return "persistence";
  return "internal";
}

Json plan_summary(const GenerationPlan& plan) {
  Json steps = Json::array();
  for (const auto& s : plan.steps) {
    steps.push_back({{"step_index", s.step_index},
                     {"panels", s.layout.panel_count},
                     {"target_ordinals", s.target_ordinals}});
  }
  return {{"task", to_string(plan.shape.kind)},
          {"m", plan.shape.m},
          {"n", plan.shape.n},
          {"steps", steps},
          {"warnings", plan.warnings}};
}

}  // namespace

std::string default_image_url(const std::string& session_id, const std::string& image_id) {
  return "/api/images/" + session_id + "/" + image_id;
}

int append_turn(Session& session, std::string text, std::vector<std::string> image_ids,
                TurnMode mode) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw InputError("message text is empty");
  }
  for (const auto& id : image_ids) {
    if (!session.find_image(id)) throw InputError("unknown image id " + id);
  }
  if (!session.turns.empty() && !session.turns.back().finished()) {
    throw BusyError("session " + session.id + " already has an active turn");
  }
  Turn turn;
  turn.index = static_cast<int>(session.turns.size());
  turn.user_text = std::move(text);
  turn.user_image_ids = std::move(image_ids);
  turn.mode = mode;
  session.turns.push_back(std::move(turn));
  session.updated_at = unix_millis();
  return session.turns.back().index;
}

TurnRunner::TurnRunner(const PipelineServices& services, BlobStore& blobs)
    : services_(services), blobs_(blobs) {}

TurnStatus TurnRunner::run(Session& session, int turn_index, TurnEventLog& log) {
  std::mutex emit_mu;
  auto turn = [&]() -> Turn& { return session.turns.at(static_cast<std::size_t>(turn_index)); };
  auto emit = [&](EventKind kind, Json payload) {
    std::lock_guard lock(emit_mu);
    turn().events.push_back(log.append(kind, std::move(payload)));
  };
  auto save = [&] {
    session.updated_at = unix_millis();
    if (checkpoint) checkpoint(session);
  };
  // Terminal events are persisted before listeners see them, so a client
  // reacting to turn_done finds the session idle and saved.
  auto finish = [&](EventKind kind, Json payload) {
    TurnEvent e;
    e.kind = kind;
    e.turn = turn_index;
    e.payload = payload;
    e.seq = static_cast<long long>(turn().events.size());
    turn().events.push_back(e);
    save();
    if (log.append(kind, std::move(payload)).seq != e.seq) {
      throw std::logic_error("event log and turn transcript disagree");
    }
  };

  try {
    if (!services_.gateway) throw ConfigError("no LLM gateway configured");
    turn().advance(TurnStatus::parsing);
    emit(EventKind::parsing_started, Json::object());
    InstructionParser parser(*services_.gateway, services_.parser);
    ParsedInstruction parsed = parser.parse_turn(session, turn_index);
    if (turn().mode == TurnMode::article) parsed.wants_article = true;
    turn().parsed = parsed;
    emit(EventKind::parsed, {{"num_outputs", parsed.num_outputs},
                             {"resolved_input_ids", parsed.resolved_input_ids},
                             {"wants_article", parsed.wants_article}});
    save();

    turn().advance(TurnStatus::planning);
    emit(EventKind::planning_started, Json::object());
    StrategyPlanner planner(services_.gateway.get(), services_.planner);
    const TaskShape shape =
        classify(static_cast<int>(parsed.resolved_input_ids.size()), parsed.num_outputs);
    GenerationPlan plan =
        planner.make_plan(shape, parsed, PlanContext{session.id, turn_index, services_.base_seed});
    turn().plan = plan;
    emit(EventKind::planned, plan_summary(plan));
    save();

    turn().advance(TurnStatus::executing);
    if (!services_.plan_only) {
      if (!services_.backend) throw ConfigError("no diffusion backend configured");
      InContextToolkit toolkit(*services_.backend, services_.toolkit);
      ExecutionAgent executor(toolkit);
      const int total = static_cast<int>(plan.steps.size());
      ProgressSink progress;
      progress.step_started = [&](const PlanStep& s) {
        emit(EventKind::step_started, {{"step_index", s.step_index},
                                       {"total_steps", total},
                                       {"target_ordinals", s.target_ordinals}});
      };
      progress.step_finished = [&](const PlanStep& s, long long ms) {
        emit(EventKind::step_finished, {{"step_index", s.step_index}, {"elapsed_ms", ms}});
      };
      progress.image_ready = [&](int ordinal, const ImageRecord& rec) {
        turn().output_image_ids.push_back(rec.id);
        emit(EventKind::image_ready, {{"ordinal", ordinal}, {"image", rec}});
      };
      const auto outputs = executor.execute_plan(session, blobs_, turn_index, plan, progress);
      save();

      if (parsed.wants_article) {
        MarkdownAgent writer(services_.gateway.get());
        ArticleDocument doc = writer.compose_article(turn().user_text, parsed, outputs, turn_index);
        const std::string sid = session.id;
        const auto& url = services_.image_url;
        const std::string markdown = render_markdown(doc, [&](const std::string& id) {
          return std::optional<std::string>(url ? url(sid, id) : default_image_url(sid, id));
        });
        turn().article = doc;
        emit(EventKind::article_ready,
             {{"title", doc.title}, {"markdown", markdown}, {"warnings", doc.warnings}});
      }
    }

    turn().advance(TurnStatus::done);
    finish(EventKind::turn_done, {{"output_image_ids", turn().output_image_ids}});
  } catch (const std::exception& e) {
    if (!turn().events.empty() && turn().events.back().terminal()) throw;  // final checkpoint failed
    if (!turn().finished()) turn().advance(TurnStatus::failed);
    turn().failure_reason = e.what();
    finish(EventKind::turn_failed, {{"reason", e.what()}, {"error", error_kind(e)}});
  }
  return turn().status;
}

// ---------------------------------------------------------------------------

SessionManager::SessionManager(std::shared_ptr<SessionRepository> repo, PipelineServices services)
    : repo_(std::move(repo)), services_(std::move(services)) {}

SessionManager::~SessionManager() {
  std::map<std::string, std::shared_ptr<Slot>> slots;
  {
    std::lock_guard lock(mu_);
    slots = slots_;
  }
  for (auto& [id, s] : slots) {
    if (s->worker.joinable()) s->worker.join();
  }
}

std::shared_ptr<SessionManager::Slot> SessionManager::slot(const std::string& session_id) {
  std::lock_guard lock(mu_);
  if (auto it = slots_.find(session_id); it != slots_.end()) return it->second;
  auto s = std::make_shared<Slot>();
  s->session = repo_->restore(session_id);
  repo_->persist(s->session);  // records any interrupted turns
  slots_[session_id] = s;
  return s;
}

void SessionManager::publish(Slot& s, const Session& session) {
  std::lock_guard lock(s.mu);
  s.session = session;
  repo_->persist(s.session);
  const auto active = static_cast<std::size_t>(s.active_turn);
  if (s.busy && active < s.session.turns.size() && s.session.turns[active].finished()) {
    s.busy = false;
    s.idle.notify_all();
  }
}

Session SessionManager::create_session() {
  Session session = repo_->create_session();
  auto s = std::make_shared<Slot>();
  s->session = session;
  std::lock_guard lock(mu_);
  slots_[session.id] = s;
  return session;
}

Session SessionManager::snapshot(const std::string& session_id) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  return s->session;
}

ImageRecord SessionManager::upload_image(const std::string& session_id,
                                         std::span<const std::uint8_t> bytes) {
  auto s = slot(session_id);
  std::lock_guard lock(s->mu);
  if (s->busy) throw BusyError("session " + session_id + " has an active turn");
  Session next = s->session;
  const int turn = static_cast<int>(next.turns.size());
  ImageRecord rec = register_image(next, *repo_->blobs(), ImageSource::uploaded, bytes, "", turn);
  next.updated_at = unix_millis();
  repo_->persist(next);
  s->session = std::move(next);
  return rec;
}

int SessionManager::submit_turn(const std::string& session_id, std::string text,
                                std::vector<std::string> image_ids, TurnMode mode) {
  auto s = slot(session_id);
  std::unique_lock lock(s->mu);
  if (s->busy) throw BusyError("session " + session_id + " has an active turn");
  Session work = s->session;
  const int index = append_turn(work, std::move(text), std::move(image_ids), mode);
  repo_->persist(work);
  s->session = work;
  auto log = hub_.open(session_id, index);
  s->busy = true;
  s->active_turn = index;
  // The previous worker may still be unwinding; it needs s->mu to exit.
  std::thread previous = std::move(s->worker);
  s->worker = std::thread([this, s, log, index, work = std::move(work)]() mutable {
    try {
      TurnRunner runner(services_, *repo_->blobs());
      runner.checkpoint = [&](const Session& state) { publish(*s, state); };
      runner.run(work, index, *log);
    } catch (const std::exception& e) {
      std::cerr << "chatdit: turn " << index << " of session " << work.id
                << " could not be saved: " << e.what() << "\n";
      if (!log->closed()) {
        try {
          log->append(EventKind::turn_failed, {{"reason", e.what()}, {"error", "persistence"}});
        } catch (const std::exception&) {
        }
      }
    }
    std::lock_guard done(s->mu);
    if (s->active_turn == index) {
      s->busy = false;
      s->idle.notify_all();
    }
  });
  lock.unlock();
  if (previous.joinable()) previous.join();
  return index;
}

std::shared_ptr<TurnEventLog> SessionManager::events(const std::string& session_id, int turn) {
  auto s = slot(session_id);
  if (auto log = hub_.find(session_id, turn)) return log;
  std::lock_guard lock(s->mu);
  if (turn < 0 || turn >= static_cast<int>(s->session.turns.size())) {
    throw NotFoundError("session " + session_id + " has no turn " + std::to_string(turn));
  }
  return hub_.open(session_id, turn, s->session.turns[static_cast<std::size_t>(turn)].events);
}

Bytes SessionManager::image_bytes(const std::string& session_id, const std::string& image_id) {
  std::string key;
  {
    auto s = slot(session_id);
    std::lock_guard lock(s->mu);
    const ImageRecord* rec = s->session.find_image(image_id);
    if (!rec) throw NotFoundError("no image " + image_id + " in session " + session_id);
    key = rec->storage_key;
  }
  return blob_bytes(key);
}

Bytes SessionManager::blob_bytes(const std::string& storage_key) {
  std::optional<Bytes> bytes;
  try {
    bytes = repo_->blobs()->get(storage_key);
  } catch (const InputError&) {
  }
  if (!bytes) throw NotFoundError("no image " + storage_key);
  return *bytes;
}

void SessionManager::wait_idle(const std::string& session_id) {
  auto s = slot(session_id);
  std::unique_lock lock(s->mu);
  s->idle.wait(lock, [&] { return !s->busy; });
}

}  // namespace chatdit
