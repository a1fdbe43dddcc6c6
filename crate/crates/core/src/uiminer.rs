//! Mines visible UI elements from Android resource trees (`res/layout*`,
//! `res/menu`, `res/values/strings.xml`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::textprep::{preprocess, split_identifier, LemmaTable, StopList};

const ANDROID_NS: &str = "http://schemas.android.com/apk/res/android";
const APP_NS: &str = "http://schemas.android.com/apk/res-auto";

/// A widget found in a layout or menu resource.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UIElement {
    pub app: String,
    pub release_ordinal: usize,
    pub element_type: String,
    pub resource_id: Option<String>,
    pub label: Option<String>,
    pub icon: Option<String>,
    /// Path relative to the resource root, `/`-separated.
    pub source_file: String,
}

impl UIElement {
    pub fn key(&self) -> ElementKey {
        match &self.resource_id {
            Some(id) => ElementKey::Id(id.clone()),
            None => ElementKey::Label {
                element_type: self.element_type.clone(),
                label: normalize_label(self.label.as_deref().unwrap_or("")),
            },
        }
    }
}

/// Cross-release identity of an element: its `android:id`, or failing that
/// its type plus normalised label. Renders as `id` or `Type:label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementKey {
    Id(String),
    Label { element_type: String, label: String },
}

impl fmt::Display for ElementKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElementKey::Id(id) => f.write_str(id),
            ElementKey::Label { element_type, label } => write!(f, "{element_type}:{label}"),
        }
    }
}

impl FromStr for ElementKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::invalid("empty element key"));
        }
        Ok(match s.split_once(':') {
            Some((t, l)) => ElementKey::Label { element_type: t.to_string(), label: l.to_string() },
            None => ElementKey::Id(s.to_string()),
        })
    }
}

impl Serialize for ElementKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn normalize_label(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// String-resource name to display text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringTable(pub BTreeMap<String, String>);

impl StringTable {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.0.get(name).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn unescape_android(raw: &str) -> String {
    let trimmed = raw.trim();
    let quoted = trimmed.len() >= 2 && trimmed.starts_with('"') && trimmed.ends_with('"');
    let body = if quoted {
        trimmed[1..trimmed.len() - 1].to_string()
    } else {
        raw.split_whitespace().collect::<Vec<_>>().join(" ")
    };
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some(other) => out.push(other),
            None => {}
        }
    }
    out
}

pub fn parse_strings_str(text: &str, origin: &Path) -> Result<StringTable> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| Error::Xml { path: origin.to_path_buf(), message: e.to_string() })?;
    let mut table = BTreeMap::new();
    for node in doc.root_element().children().filter(|n| n.has_tag_name("string")) {
        let Some(name) = node.attribute("name") else {
            continue;
        };
        let raw: String = node
            .descendants()
            .filter(|n| n.is_text())
            .filter_map(|n| n.text())
            .collect();
        if table.insert(name.to_string(), unescape_android(&raw)).is_some() {
            log::warn!("{}: duplicate string name {name}; keeping the last value", origin.display());
        }
    }
    Ok(StringTable(table))
}

/// Parses a `strings.xml` file. Nested markup is flattened to its text.
pub fn parse_strings(path: &Path) -> Result<StringTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_strings_str(&text, path)
}

/// Which XML tags count as visible functionality.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WidgetTags {
    pub allow: BTreeSet<String>,
    /// Tags containing a dot (custom views) are widgets unless their last
    /// segment is a known container.
    pub include_custom: bool,
    pub containers: BTreeSet<String>,
}

impl Default for WidgetTags {
    fn default() -> Self {
        let allow = [
            "AutoCompleteTextView", "Button", "CheckBox", "CheckedTextView", "Chip", "EditText",
            "FloatingActionButton", "ImageButton", "ImageView", "MaterialButton", "MultiAutoCompleteTextView",
            "NumberPicker", "RadioButton", "RatingBar", "SearchView", "SeekBar", "Spinner", "Switch",
            "SwitchCompat", "TextView", "ToggleButton", "MenuItem",
        ];
        let containers = [
            "AppBarLayout", "CardView", "CollapsingToolbarLayout", "ConstraintLayout", "CoordinatorLayout",
            "DrawerLayout", "FrameLayout", "GridLayout", "GridView", "HorizontalScrollView", "LinearLayout",
            "ListView", "NestedScrollView", "RecyclerView", "RelativeLayout", "ScrollView", "Space",
            "SwipeRefreshLayout", "TabLayout", "TableLayout", "TableRow", "Toolbar", "View", "ViewFlipper",
            "ViewPager", "ViewPager2", "ViewStub", "include", "merge", "fragment", "requestFocus",
        ];
        WidgetTags {
            allow: allow.iter().map(|s| s.to_string()).collect(),
            include_custom: true,
            containers: containers.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl WidgetTags {
    pub fn with_extra<I: IntoIterator<Item = S>, S: Into<String>>(mut self, extra: I) -> Self {
        self.allow.extend(extra.into_iter().map(Into::into));
        self
    }

    pub fn is_widget(&self, tag: &str) -> bool {
        if self.allow.contains(tag) {
            return true;
        }
        match tag.rsplit_once('.') {
            Some((_, last)) => {
                self.include_custom
                    && !self.containers.contains(last)
                    && !last.ends_with("Layout")
            }
            None => false,
        }
    }
}

fn attr<'a>(node: &roxmltree::Node<'a, '_>, local: &str) -> Option<&'a str> {
    node.attributes()
        .find(|a| {
            a.name() == local && matches!(a.namespace(), None | Some(ANDROID_NS) | Some(APP_NS))
        })
        .map(|a| a.value())
}

fn resource_name(reference: &str) -> Option<&str> {
    reference.rsplit_once('/').map(|(_, n)| n).filter(|n| !n.is_empty())
}

fn resolve_label(raw: &str, strings: &StringTable, file: &str) -> Option<String> {
    if let Some(name) = raw.strip_prefix("@string/") {
        match strings.get(name) {
            Some(text) => Some(text.to_string()),
            None => {
                log::warn!("{file}: unresolvable string @string/{name}");
                None
            }
        }
    } else if raw.starts_with('@') || raw.starts_with('?') {
        log::warn!("{file}: unresolvable label reference {raw}");
        None
    } else if raw.trim().is_empty() {
        None
    } else {
        Some(raw.to_string())
    }
}

const LABEL_ATTRS: &[&str] = &["text", "title", "hint", "contentDescription"];
const ICON_ATTRS: &[&str] = &[
    "src", "srcCompat", "icon", "drawableStart", "drawableLeft", "drawableTop", "drawableEnd",
    "drawableRight", "drawableBottom",
];

/// Parses one layout or menu document.
pub fn parse_layout_str(
    text: &str,
    source_file: &str,
    strings: &StringTable,
    tags: &WidgetTags,
    app: &str,
    release_ordinal: usize,
) -> Result<Vec<UIElement>> {
    let doc = roxmltree::Document::parse(text)
        .map_err(|e| Error::Xml { path: PathBuf::from(source_file), message: e.to_string() })?;
    let is_menu = doc.root_element().has_tag_name("menu");
    let mut out = Vec::new();
    for node in doc.descendants().filter(|n| n.is_element()) {
        let tag = node.tag_name().name();
        let element_type = if is_menu && tag == "item" { "MenuItem" } else { tag };
        if !tags.is_widget(element_type) {
            continue;
        }
        let resource_id = attr(&node, "id").and_then(resource_name).map(str::to_string);
        let label = LABEL_ATTRS
            .iter()
            .find_map(|a| attr(&node, a))
            .and_then(|raw| resolve_label(raw, strings, source_file));
        let icon = ICON_ATTRS
            .iter()
            .find_map(|a| attr(&node, a))
            .filter(|v| v.starts_with('@'))
            .and_then(resource_name)
            .map(str::to_string);
        if resource_id.is_none() && label.is_none() {
            continue;
        }
        out.push(UIElement {
            app: app.to_string(),
            release_ordinal,
            element_type: element_type.to_string(),
            resource_id,
            label,
            icon,
            source_file: source_file.to_string(),
        });
    }
    Ok(out)
}

fn resource_files(res: &Path) -> Vec<(String, PathBuf)> {
    let mut files = Vec::new();
    let Ok(dirs) = std::fs::read_dir(res) else {
        return files;
    };
    for dir in dirs.flatten() {
        let name = dir.file_name().to_string_lossy().into_owned();
        if !(name.starts_with("layout") || name == "menu") || !dir.path().is_dir() {
            continue;
        }
        let Ok(entries) = std::fs::read_dir(dir.path()) else {
            continue;
        };
        for f in entries.flatten() {
            let fname = f.file_name().to_string_lossy().into_owned();
            if fname.ends_with(".xml") {
                files.push((format!("res/{name}/{fname}"), f.path()));
            }
        }
    }
    files.sort();
    files
}

/// Mines every layout and menu file under `resource_root/res`, files in
/// lexicographic path order, elements in document order. Unparseable files
/// are skipped with a warning.
pub fn parse_layouts(
    resource_root: &Path,
    strings: &StringTable,
    tags: &WidgetTags,
    app: &str,
    release_ordinal: usize,
) -> Vec<UIElement> {
    let mut out = Vec::new();
    for (rel, path) in resource_files(&resource_root.join("res")) {
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                log::warn!("{}: {e}; skipped", path.display());
                continue;
            }
        };
        match parse_layout_str(&text, &rel, strings, tags, app, release_ordinal) {
            Ok(mut els) => out.append(&mut els),
            Err(e) => log::warn!("{e}; file skipped"),
        }
    }
    out
}

/// Strings, layouts and menus of one release. A missing or malformed
/// `strings.xml` yields an empty table and a warning.
pub fn mine_release(resource_root: &Path, tags: &WidgetTags, app: &str, release_ordinal: usize) -> Vec<UIElement> {
    let strings_path = resource_root.join("res/values/strings.xml");
    let strings = if strings_path.exists() {
        parse_strings(&strings_path).unwrap_or_else(|e| {
            log::warn!("{e}; continuing with an empty string table");
            StringTable::default()
        })
    } else {
        StringTable::default()
    };
    parse_layouts(resource_root, &strings, tags, app, release_ordinal)
}

/// Description document of an element: type, split resource id, label and
/// split icon name, run through [`preprocess`].
pub fn describe_element(e: &UIElement, table: &LemmaTable, stoplist: &StopList) -> Vec<String> {
    let short_type = e.element_type.rsplit('.').next().unwrap_or(&e.element_type);
    let mut parts: Vec<String> = split_identifier(short_type);
    if let Some(id) = &e.resource_id {
        parts.extend(split_identifier(id));
    }
    if let Some(label) = &e.label {
        parts.push(label.clone());
    }
    if let Some(icon) = &e.icon {
        parts.extend(split_identifier(icon));
    }
    preprocess(&parts.join(" "), table, stoplist)
}

/// `elements.jsonl` line: the element plus its rendered key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementRecord {
    #[serde(flatten)]
    pub element: UIElement,
    pub element_key: ElementKey,
}

impl From<UIElement> for ElementRecord {
    fn from(element: UIElement) -> Self {
        let element_key = element.key();
        ElementRecord { element, element_key }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const STRINGS: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<resources xmlns:xliff="urn:oasis:names:tc:xliff:document:1.2">
    <string name="btn_mic_label">Start Listening</string>
    <string name="share">Share <b>via</b></string>
    <string name="quoted">"Don\'t  stop"</string>
    <string name="dup">first</string>
    <string name="dup">second</string>
    <string-array name="ignored"><item>x</item></string-array>
</resources>"#;

    fn strings() -> StringTable {
        parse_strings_str(STRINGS, Path::new("strings.xml")).unwrap()
    }

    #[test]
    fn string_table() {
        let t = strings();
        assert_eq!(t.get("btn_mic_label"), Some("Start Listening"));
        assert_eq!(t.get("share"), Some("Share via"));
        assert_eq!(t.get("quoted"), Some("Don't  stop"));
        assert_eq!(t.get("dup"), Some("second"));
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn empty_resources() {
        let t = parse_strings_str("<resources/>", Path::new("s.xml")).unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn malformed_strings_is_error() {
        assert!(matches!(
            parse_strings_str("<resources><string name='a'>x</resources>", Path::new("s.xml")),
            Err(Error::Xml { .. })
        ));
    }

    const LAYOUT: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android"
    xmlns:app="http://schemas.android.com/apk/res-auto"
    xmlns:tools="http://schemas.android.com/tools"
    android:orientation="vertical">
    <Button android:id="@+id/btn_mic" android:text="@string/btn_mic_label"
        android:drawableStart="@drawable/mic" />
    <TextView android:text="Literal label" />
    <TextView tools:text="design only" />
    <EditText android:id="@+id/query" android:hint="@string/missing" />
    <com.example.widget.FancyToggle android:id="@+id/fancy" />
    <androidx.constraintlayout.widget.ConstraintLayout android:id="@+id/holder" />
    <ImageView android:id="@+id/logo" app:srcCompat="@drawable/ic_logo" />
</LinearLayout>"#;

    #[test]
    fn layout_widgets() {
        let els = parse_layout_str(LAYOUT, "res/layout/main.xml", &strings(), &WidgetTags::default(), "a", 2).unwrap();
        let summary: Vec<_> = els
            .iter()
            .map(|e| (e.element_type.as_str(), e.resource_id.as_deref(), e.label.as_deref(), e.icon.as_deref()))
            .collect();
        assert_eq!(
            summary,
            vec![
                ("Button", Some("btn_mic"), Some("Start Listening"), Some("mic")),
                ("TextView", None, Some("Literal label"), None),
                ("EditText", Some("query"), None, None),
                ("com.example.widget.FancyToggle", Some("fancy"), None, None),
                ("ImageView", Some("logo"), None, Some("ic_logo")),
            ]
        );
        assert!(els.iter().all(|e| e.release_ordinal == 2 && e.app == "a"));
    }

    #[test]
    fn containers_only_layout_is_empty() {
        let xml = r#"<LinearLayout xmlns:android="http://schemas.android.com/apk/res/android">
            <LinearLayout android:id="@+id/inner"><FrameLayout android:id="@+id/f"/></LinearLayout>
        </LinearLayout>"#;
        let els = parse_layout_str(xml, "x.xml", &StringTable::default(), &WidgetTags::default(), "a", 0).unwrap();
        assert!(els.is_empty());
    }

    #[test]
    fn menu_items() {
        let xml = r#"<menu xmlns:android="http://schemas.android.com/apk/res/android">
            <item android:title="Saved pages" android:icon="@drawable/ic_bookmark"/>
            <item android:id="@+id/close_all_tabs" android:title="Close all tabs"/>
        </menu>"#;
        let els = parse_layout_str(xml, "res/menu/m.xml", &StringTable::default(), &WidgetTags::default(), "a", 0).unwrap();
        assert_eq!(els.len(), 2);
        assert_eq!(els[0].element_type, "MenuItem");
        assert_eq!(els[0].key().to_string(), "MenuItem:saved pages");
        assert_eq!(els[1].key().to_string(), "close_all_tabs");
    }

    #[test]
    fn key_round_trips_through_string() {
        for s in ["btn_mic", "MenuItem:saved pages"] {
            let k: ElementKey = s.parse().unwrap();
            assert_eq!(k.to_string(), s);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(serde_json::from_str::<ElementKey>(&json).unwrap(), k);
        }
    }

    fn el(t: &str, id: Option<&str>, label: Option<&str>, icon: Option<&str>) -> UIElement {
        UIElement {
            app: "a".into(),
            release_ordinal: 0,
            element_type: t.into(),
            resource_id: id.map(Into::into),
            label: label.map(Into::into),
            icon: icon.map(Into::into),
            source_file: "x".into(),
        }
    }

    fn describe(e: &UIElement) -> Vec<String> {
        describe_element(e, LemmaTable::bundled(), StopList::bundled())
    }

    #[test]
    fn description_of_mic_button() {
        let e = el("Button", Some("btn_mic"), Some("Start Listening"), Some("mic"));
        assert_eq!(describe(&e), ["button", "btn", "mic", "start", "listen", "mic"]);
    }

    #[test]
    fn description_of_bare_switch() {
        assert_eq!(describe(&el("Switch", None, None, None)), ["switch"]);
    }

    #[test]
    fn description_splits_camel_case_ids() {
        let d = describe(&el("ImageButton", Some("closeAllTabs2"), None, None));
        for w in ["close", "all", "tab"] {
            assert!(d.contains(&w.to_string()), "{d:?} lacks {w}");
        }
    }

    #[test]
    fn label_key_normalises_whitespace_and_case() {
        let e = el("TextView", None, Some("  Saved   Pages "), None);
        assert_eq!(e.key(), ElementKey::Label { element_type: "TextView".into(), label: "saved pages".into() });
    }

    #[test]
    fn mining_a_tree_is_ordered_and_tolerates_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let res = dir.path().join("res");
        std::fs::create_dir_all(res.join("layout")).unwrap();
        std::fs::create_dir_all(res.join("menu")).unwrap();
        std::fs::create_dir_all(res.join("values")).unwrap();
        std::fs::write(res.join("values/strings.xml"), STRINGS).unwrap();
        std::fs::write(res.join("layout/b.xml"), LAYOUT).unwrap();
        std::fs::write(res.join("layout/a.xml"), "<LinearLayout><Button").unwrap();
        std::fs::write(
            res.join("menu/main.xml"),
            r#"<menu xmlns:android="http://schemas.android.com/apk/res/android"><item android:title="@string/share"/></menu>"#,
        )
        .unwrap();
        let els = mine_release(dir.path(), &WidgetTags::default(), "a", 0);
        assert_eq!(els.len(), 6);
        assert_eq!(els[0].source_file, "res/layout/b.xml");
        assert_eq!(els[5].label.as_deref(), Some("Share via"));
        let again = mine_release(dir.path(), &WidgetTags::default(), "a", 0);
        assert_eq!(
            serde_json::to_string(&els).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
