#include "rtlevo/error.hpp"
#include "rtlevo/llm.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace rtlevo {

HttpChatProvider::HttpChatProvider(ProviderConfig cfg) : cfg_(std::move(cfg))
{
    validate_provider_config(cfg_);
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
        api_key_ = key;
}

std::string HttpChatProvider::generate(const Prompt& prompt)
{
    json body{{"messages",
               json::array({{{"role", "system"}, {"content", prompt.system_text}},
                            {{"role", "user"}, {"content", prompt.user_text}}})},
              {"temperature", cfg_.temperature.value_or(prompt.temperature)}};
    if (!cfg_.model.empty())
        body["model"] = cfg_.model;
    std::string payload = dump_text(body);

    httplib::Headers headers;
    if (!api_key_.empty())
        headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
        httplib::Client cli(cfg_.endpoint);
        auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
        cli.set_connection_timeout(timeout);
        cli.set_read_timeout(timeout);
        cli.set_write_timeout(timeout);
        auto res = cli.Post(cfg_.base_path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProviderError("HTTP " + std::to_string(res->status) + ": " + truncate_with_marker(res->body, 500));
        try {
            auto j = json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProviderError(std::string("malformed chat response: ") + e.what());
        }
    }
    throw ProviderError("retries exhausted after " + std::to_string(cfg_.max_retries + 1) + " attempts: " +
                        last_error);
}

} // namespace rtlevo
