#ifndef KINFORGE_CONFIG_HPP
#define KINFORGE_CONFIG_HPP

#include <map>
#include <string>

#include "kinforge/campaign.hpp"

namespace kinforge {

/// Whole-application configuration resolved from the plain-text key=value
/// format. In-code defaults are the canonical artifact configuration.
struct AppConfig {
    PlantConfig plant;
    CampaignConfig campaign;

    void validate() const {
        plant.validate();
        campaign.validate();
    }
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses `key = value` lines ('#' comments). Unknown keys are schema errors.
AppConfig parse_config_text(const std::string& text);
AppConfig load_config_file(const std::string& path);

/// Canonical default configuration file, with the schema documented inline.
std::string default_config_text();

}  // namespace kinforge

#endif
