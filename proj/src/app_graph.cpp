#include <fstream>
#include <set>

#include "guirl/env.hpp"
#include "json.hpp"

namespace guirl {

namespace {

constexpr const char* kOrigin = "app_graph";

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed,
                const std::string& origin) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            raise(ErrKind::schema, origin, "unknown key '" + it.key() + "'");
        }
    }
}

bool ranges_overlap(double lo1, double hi1, double lo2, double hi2) {
    return std::min(hi1, hi2) - std::max(lo1, lo2) > 0.0;
}

}  // namespace

std::string_view to_string(WidgetKind kind) {
    switch (kind) {
        case WidgetKind::button: return "button";
        case WidgetKind::textfield: return "textfield";
        case WidgetKind::list_item: return "list_item";
        case WidgetKind::nav: return "nav";
    }
    return "button";
}

std::optional<WidgetKind> widget_kind_from(std::string_view name) {
    if (name == "button") return WidgetKind::button;
    if (name == "textfield") return WidgetKind::textfield;
    if (name == "list_item") return WidgetKind::list_item;
    if (name == "nav") return WidgetKind::nav;
    return std::nullopt;
}

struct AppGraphBuilder {
    AppGraph g;
    Screen* current = nullptr;
    std::map<std::string, int> slots;  // per (screen,page) vertical slot

    void app(const std::string& id, const std::string& name, const std::string& root) {
        g.apps_.push_back({id, name, root});
    }

    void screen(const std::string& id, const std::string& name, const std::string& app,
                int page_count = 1) {
        Screen s;
        s.id = id;
        s.name = name;
        s.app = app;
        s.page_count = page_count;
        g.screen_index_[id] = g.screens_.size();
        g.screens_.push_back(std::move(s));
        current = &g.screens_.back();
    }

    void widget(const std::string& id, const std::string& text, WidgetKind kind,
                const std::string& on_click = "", int page = 0) {
        std::string slot_key = current->id + "#" + std::to_string(page);
        int slot = slots[slot_key]++;
        Widget w;
        w.id = id;
        w.text = text;
        w.kind = kind;
        w.bbox = {540.0, 200.0 + 260.0 * slot, 900.0, 200.0};
        w.on_click = on_click;
        w.page = page;
        current->widgets.push_back(std::move(w));
    }

    AppGraph take() {
        g.validate();
        return std::move(g);
    }
};

AppGraph AppGraph::builtin() {
    AppGraphBuilder b;
    b.g.start_screen_ = "sys.launcher";

    b.app("mail", "Mail", "mail.home");
    b.app("shop", "Shop", "shop.home");
    b.app("notes", "Notes", "notes.home");

    b.screen("sys.launcher", "Launcher", "");
    b.widget("sys.mail_icon", "Mail", WidgetKind::nav, "mail.home");
    b.widget("sys.shop_icon", "Shop", WidgetKind::nav, "shop.home");
    b.widget("sys.notes_icon", "Notes", WidgetKind::nav, "notes.home");
    b.widget("sys.clock", "Clock", WidgetKind::button);

    b.screen("mail.home", "Mail Home", "mail");
    b.widget("mail.inbox_nav", "Inbox", WidgetKind::nav, "mail.inbox");
    b.widget("mail.compose_nav", "Compose", WidgetKind::nav, "mail.compose");
    b.widget("mail.settings_nav", "Settings", WidgetKind::nav, "mail.settings");
    b.widget("mail.starred_nav", "Starred", WidgetKind::nav, "mail.starred");
    b.widget("mail.sync_btn", "Sync", WidgetKind::button);
    b.widget("mail.search_field", "Search Box", WidgetKind::textfield);

    b.screen("mail.inbox", "Inbox", "mail", 2);
    b.widget("mail.msg_alpha", "Message Alpha", WidgetKind::list_item);
    b.widget("mail.msg_beta", "Message Beta", WidgetKind::list_item);
    b.widget("mail.msg_gamma", "Message Gamma", WidgetKind::list_item);
    b.widget("mail.inbox_back", "Back", WidgetKind::nav, "mail.home");
    b.widget("mail.msg_delta", "Message Delta", WidgetKind::list_item, "", 1);
    b.widget("mail.msg_epsilon", "Message Epsilon", WidgetKind::list_item, "", 1);
    b.widget("mail.archive_btn", "Archive All", WidgetKind::button, "", 1);

    b.screen("mail.compose", "Compose", "mail");
    b.widget("mail.to_field", "To Field", WidgetKind::textfield);
    b.widget("mail.subject_field", "Subject Field", WidgetKind::textfield);
    b.widget("mail.body_field", "Body Field", WidgetKind::textfield);
    b.widget("mail.send_btn", "Send", WidgetKind::button);
    b.widget("mail.compose_back", "Back", WidgetKind::nav, "mail.home");

    b.screen("mail.settings", "Settings", "mail");
    b.widget("mail.notif_btn", "Notifications", WidgetKind::button);
    b.widget("mail.theme_btn", "Theme", WidgetKind::button);
    b.widget("mail.signature_field", "Signature Field", WidgetKind::textfield);
    b.widget("mail.advanced_nav", "Advanced", WidgetKind::nav, "mail.advanced");
    b.widget("mail.settings_back", "Back", WidgetKind::nav, "mail.home");

    b.screen("mail.advanced", "Advanced", "mail");
    b.widget("mail.reset_btn", "Reset Cache", WidgetKind::button);
    b.widget("mail.export_btn", "Export Logs", WidgetKind::button);
    b.widget("mail.debug_btn", "Debug Mode", WidgetKind::button);
    b.widget("mail.advanced_back", "Back", WidgetKind::nav, "mail.settings");

    b.screen("mail.starred", "Starred", "mail");
    b.widget("mail.pinned_note", "Pinned Note", WidgetKind::list_item);
    b.widget("mail.unstar_btn", "Unstar All", WidgetKind::button);
    b.widget("mail.refresh_star", "Refresh Stars", WidgetKind::button);
    b.widget("mail.starred_back", "Back", WidgetKind::nav, "mail.home");

    b.screen("shop.home", "Shop Home", "shop");
    b.widget("shop.browse_nav", "Browse", WidgetKind::nav, "shop.browse");
    b.widget("shop.cart_nav", "Cart", WidgetKind::nav, "shop.cart");
    b.widget("shop.profile_nav", "Profile", WidgetKind::nav, "shop.profile");
    b.widget("shop.search_input", "Search Input", WidgetKind::textfield);
    b.widget("shop.deals_btn", "Deals", WidgetKind::button);

    b.screen("shop.browse", "Browse", "shop", 2);
    b.widget("shop.red_shoes", "Red Shoes", WidgetKind::list_item);
    b.widget("shop.blue_jacket", "Blue Jacket", WidgetKind::list_item);
    b.widget("shop.green_hat", "Green Hat", WidgetKind::list_item);
    b.widget("shop.browse_back", "Back", WidgetKind::nav, "shop.home");
    b.widget("shop.black_watch", "Black Watch", WidgetKind::list_item, "", 1);
    b.widget("shop.white_scarf", "White Scarf", WidgetKind::list_item, "", 1);
    b.widget("shop.filter_btn", "Filter", WidgetKind::button, "", 1);

    b.screen("shop.cart", "Cart", "shop");
    b.widget("shop.cart_item", "Cart Item One", WidgetKind::list_item);
    b.widget("shop.gift_field", "Gift Note Field", WidgetKind::textfield);
    b.widget("shop.checkout_btn", "Checkout", WidgetKind::button);
    b.widget("shop.cart_back", "Back", WidgetKind::nav, "shop.home");

    b.screen("shop.profile", "Profile", "shop");
    b.widget("shop.nickname_field", "Nickname Field", WidgetKind::textfield);
    b.widget("shop.logout_btn", "Log Out", WidgetKind::button);
    b.widget("shop.orders_nav", "Orders", WidgetKind::nav, "shop.orders");
    b.widget("shop.profile_back", "Back", WidgetKind::nav, "shop.home");

    b.screen("shop.orders", "Orders", "shop");
    b.widget("shop.order_1001", "Order 1001", WidgetKind::list_item);
    b.widget("shop.order_1002", "Order 1002", WidgetKind::list_item);
    b.widget("shop.refresh_btn", "Refresh", WidgetKind::button);
    b.widget("shop.orders_back", "Back", WidgetKind::nav, "shop.profile");

    b.screen("notes.home", "Notes Home", "notes");
    b.widget("notes.list_nav", "All Notes", WidgetKind::nav, "notes.list");
    b.widget("notes.new_nav", "New Note", WidgetKind::nav, "notes.edit");
    b.widget("notes.trash_nav", "Trash", WidgetKind::nav, "notes.trash");
    b.widget("notes.stats_nav", "Stats", WidgetKind::nav, "notes.stats");
    b.widget("notes.sort_btn", "Sort", WidgetKind::button);

    b.screen("notes.list", "All Notes", "notes", 2);
    b.widget("notes.groceries", "Groceries", WidgetKind::list_item);
    b.widget("notes.workout", "Workout Plan", WidgetKind::list_item);
    b.widget("notes.ideas", "Ideas", WidgetKind::list_item);
    b.widget("notes.list_back", "Back", WidgetKind::nav, "notes.home");
    b.widget("notes.travel", "Travel Log", WidgetKind::list_item, "", 1);
    b.widget("notes.recipes", "Recipes", WidgetKind::list_item, "", 1);
    b.widget("notes.select_btn", "Select All", WidgetKind::button, "", 1);

    b.screen("notes.edit", "Note Editor", "notes");
    b.widget("notes.title_field", "Title Field", WidgetKind::textfield);
    b.widget("notes.content_field", "Content Field", WidgetKind::textfield);
    b.widget("notes.save_btn", "Save Note", WidgetKind::button);
    b.widget("notes.edit_back", "Back", WidgetKind::nav, "notes.home");

    b.screen("notes.trash", "Trash", "notes");
    b.widget("notes.old_draft", "Old Draft", WidgetKind::list_item);
    b.widget("notes.empty_btn", "Empty Trash", WidgetKind::button);
    b.widget("notes.restore_btn", "Restore All", WidgetKind::button);
    b.widget("notes.trash_back", "Back", WidgetKind::nav, "notes.home");

    b.screen("notes.stats", "Stats", "notes");
    b.widget("notes.weekly_btn", "Weekly", WidgetKind::button);
    b.widget("notes.monthly_btn", "Monthly", WidgetKind::button);
    b.widget("notes.export_stats", "Export Stats", WidgetKind::button);
    b.widget("notes.stats_back", "Back", WidgetKind::nav, "notes.home");

    return b.take();
}

const App* AppGraph::find_app(const std::string& id) const {
    for (const App& a : apps_) {
        if (a.id == id) return &a;
    }
    return nullptr;
}

const App* AppGraph::find_app_by_name(const std::string& name) const {
    for (const App& a : apps_) {
        if (a.name == name) return &a;
    }
    return nullptr;
}

const Screen& AppGraph::screen(const std::string& id) const {
    auto it = screen_index_.find(id);
    if (it == screen_index_.end()) {
        raise(ErrKind::domain, kOrigin, "unknown screen '" + id + "'");
    }
    return screens_[it->second];
}

bool AppGraph::has_screen(const std::string& id) const {
    return screen_index_.count(id) > 0;
}

const Widget* AppGraph::find_widget(const std::string& widget_id) const {
    for (const Screen& s : screens_) {
        for (const Widget& w : s.widgets) {
            if (w.id == widget_id) return &w;
        }
    }
    return nullptr;
}

void AppGraph::validate() const {
    std::set<std::string> app_ids, app_names, screen_ids, widget_ids;
    for (const App& a : apps_) {
        if (!app_ids.insert(a.id).second) {
            raise(ErrKind::schema, kOrigin, "duplicate app id '" + a.id + "'");
        }
        if (!app_names.insert(a.name).second) {
            raise(ErrKind::schema, kOrigin, "duplicate app name '" + a.name + "'");
        }
    }
    for (const Screen& s : screens_) {
        if (!screen_ids.insert(s.id).second) {
            raise(ErrKind::schema, kOrigin, "duplicate screen id '" + s.id + "'");
        }
        if (s.page_count < 1) {
            raise(ErrKind::schema, kOrigin, "screen '" + s.id + "' needs page_count >= 1");
        }
    }
    for (const App& a : apps_) {
        if (!screen_ids.count(a.root_screen)) {
            raise(ErrKind::schema, kOrigin, "app '" + a.id + "' has unknown root screen");
        }
    }
    if (!screen_ids.count(start_screen_)) {
        raise(ErrKind::schema, kOrigin, "unknown start screen '" + start_screen_ + "'");
    }
    for (const Screen& s : screens_) {
        for (const Widget& w : s.widgets) {
            if (!widget_ids.insert(w.id).second) {
                raise(ErrKind::schema, kOrigin, "duplicate widget id '" + w.id + "'");
            }
            if (w.page < 0 || w.page >= s.page_count) {
                raise(ErrKind::schema, kOrigin, "widget '" + w.id + "' is on a missing page");
            }
            if (w.bbox.w <= 0.0 || w.bbox.h <= 0.0) {
                raise(ErrKind::schema, kOrigin, "widget '" + w.id + "' has a degenerate box");
            }
            if (w.bbox.left() < 0.0 || w.bbox.right() > screen_w_ || w.bbox.top() < 0.0 ||
                w.bbox.bottom() > screen_h_) {
                raise(ErrKind::schema, kOrigin, "widget '" + w.id + "' leaves the screen");
            }
            if (!w.on_click.empty() && !screen_ids.count(w.on_click)) {
                raise(ErrKind::schema, kOrigin,
                      "widget '" + w.id + "' navigates to unknown screen '" + w.on_click + "'");
            }
        }
        // pairwise overlap among widgets sharing a page (the visible surface)
        for (std::size_t i = 0; i < s.widgets.size(); ++i) {
            for (std::size_t j = i + 1; j < s.widgets.size(); ++j) {
                const Widget& a = s.widgets[i];
                const Widget& b = s.widgets[j];
                if (a.page != b.page) continue;
                if (ranges_overlap(a.bbox.left(), a.bbox.right(), b.bbox.left(), b.bbox.right()) &&
                    ranges_overlap(a.bbox.top(), a.bbox.bottom(), b.bbox.top(), b.bbox.bottom())) {
                    raise(ErrKind::schema, kOrigin,
                          "widgets '" + a.id + "' and '" + b.id + "' overlap");
                }
            }
        }
    }
}

AppGraph AppGraph::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::parse, kOrigin, std::string("invalid json: ") + e.what());
    }
    check_keys(j, {"screen", "start_screen", "apps", "screens"}, kOrigin);
    AppGraph g;
    try {
        if (j.contains("screen")) {
            check_keys(j["screen"], {"w", "h"}, kOrigin);
            g.screen_w_ = j["screen"].at("w").get<double>();
            g.screen_h_ = j["screen"].at("h").get<double>();
        }
        g.start_screen_ = j.at("start_screen").get<std::string>();
        for (const auto& ja : j.at("apps")) {
            check_keys(ja, {"id", "name", "root_screen"}, kOrigin);
            g.apps_.push_back({ja.at("id").get<std::string>(), ja.at("name").get<std::string>(),
                               ja.at("root_screen").get<std::string>()});
        }
        for (const auto& js : j.at("screens")) {
            check_keys(js, {"id", "name", "app", "page_count", "widgets"}, kOrigin);
            Screen s;
            s.id = js.at("id").get<std::string>();
            s.name = js.at("name").get<std::string>();
            s.app = js.value("app", std::string());
            s.page_count = js.value("page_count", 1);
            for (const auto& jw : js.at("widgets")) {
                check_keys(jw, {"id", "text", "kind", "box", "on_click", "page"}, kOrigin);
                Widget w;
                w.id = jw.at("id").get<std::string>();
                w.text = jw.at("text").get<std::string>();
                std::string kind_name = jw.at("kind").get<std::string>();
                std::optional<WidgetKind> k = widget_kind_from(kind_name);
                if (!k) {
                    raise(ErrKind::schema, kOrigin, "unknown widget kind '" + kind_name + "'");
                }
                w.kind = *k;
                check_keys(jw.at("box"), {"cx", "cy", "w", "h"}, kOrigin);
                w.bbox.cx = jw.at("box").at("cx").get<double>();
                w.bbox.cy = jw.at("box").at("cy").get<double>();
                w.bbox.w = jw.at("box").at("w").get<double>();
                w.bbox.h = jw.at("box").at("h").get<double>();
                w.on_click = jw.value("on_click", std::string());
                w.page = jw.value("page", 0);
                s.widgets.push_back(std::move(w));
            }
            g.screen_index_[s.id] = g.screens_.size();
            g.screens_.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        raise(ErrKind::schema, kOrigin, std::string("bad graph field: ") + e.what());
    }
    g.validate();
    return g;
}

void AppGraph::save(const std::string& path) const {
    nlohmann::json j;
    j["screen"] = {{"w", screen_w_}, {"h", screen_h_}};
    j["start_screen"] = start_screen_;
    j["apps"] = nlohmann::json::array();
    for (const App& a : apps_) {
        j["apps"].push_back({{"id", a.id}, {"name", a.name}, {"root_screen", a.root_screen}});
    }
    j["screens"] = nlohmann::json::array();
    for (const Screen& s : screens_) {
        nlohmann::json js;
        js["id"] = s.id;
        js["name"] = s.name;
        js["app"] = s.app;
        js["page_count"] = s.page_count;
        js["widgets"] = nlohmann::json::array();
        for (const Widget& w : s.widgets) {
            nlohmann::json jw;
            jw["id"] = w.id;
            jw["text"] = w.text;
            jw["kind"] = std::string(to_string(w.kind));
            jw["box"] = {{"cx", w.bbox.cx}, {"cy", w.bbox.cy}, {"w", w.bbox.w}, {"h", w.bbox.h}};
            jw["on_click"] = w.on_click;
            jw["page"] = w.page;
            js["widgets"].push_back(std::move(jw));
        }
        j["screens"].push_back(std::move(js));
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrKind::io, kOrigin, "cannot open '" + path + "' for writing");
    }
    out << j.dump(2) << "\n";
    if (!out) {
        raise(ErrKind::io, kOrigin, "write failed for '" + path + "'");
    }
}

}  // namespace guirl
