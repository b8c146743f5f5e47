use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub type NodeId = usize;

/// Reference to a node that stays valid across re-parses of the same bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Locator {
    /// `#id`
    Id(String),
    /// `form[i]/name=NAME`: the `i`-th form on the page, control or button named `NAME`.
    Control { form: usize, name: String },
    /// `path:0/2/1`: child indices from the document root.
    Path(Vec<usize>),
    /// `$.a.b[0]`: a leaf inside a JSON response.
    Json(String),
    /// The whole (non-HTML, non-JSON) response body.
    Body,
}

impl fmt::Display for Locator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Locator::Id(id) => write!(f, "#{id}"),
            Locator::Control { form, name } => write!(f, "form[{form}]/name={name}"),
            Locator::Path(path) => {
                f.write_str("path:")?;
                for (i, idx) in path.iter().enumerate() {
                    if i > 0 {
                        f.write_str("/")?;
                    }
                    write!(f, "{idx}")?;
                }
                Ok(())
            }
            Locator::Json(p) => f.write_str(p),
            Locator::Body => f.write_str("body"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocatorParseError(pub String);

impl fmt::Display for LocatorParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid locator `{}` (expected `#id`, `form[i]/name=NAME` or `path:0/1/2`)", self.0)
    }
}

impl std::error::Error for LocatorParseError {}

impl FromStr for Locator {
    type Err = LocatorParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || LocatorParseError(s.to_string());
        if let Some(id) = s.strip_prefix('#') {
            if id.is_empty() || id.chars().any(char::is_whitespace) {
                return Err(err());
            }
            return Ok(Locator::Id(id.to_string()));
        }
        if let Some(rest) = s.strip_prefix("path:") {
            if rest.is_empty() {
                return Ok(Locator::Path(Vec::new()));
            }
            let path = rest
                .split('/')
                .map(|p| p.parse::<usize>().map_err(|_| err()))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(Locator::Path(path));
        }
        if let Some(rest) = s.strip_prefix("form[") {
            let (idx, tail) = rest.split_once(']').ok_or_else(err)?;
            let form = idx.parse::<usize>().map_err(|_| err())?;
            let name = tail.strip_prefix("/name=").ok_or_else(err)?;
            if name.is_empty() {
                return Err(err());
            }
            return Ok(Locator::Control {
                form,
                name: name.to_string(),
            });
        }
        if s.starts_with('$') {
            return Ok(Locator::Json(s.to_string()));
        }
        if s == "body" {
            return Ok(Locator::Body);
        }
        Err(err())
    }
}

impl From<Locator> for String {
    fn from(l: Locator) -> String {
        l.to_string()
    }
}

impl TryFrom<String> for Locator {
    type Error = LocatorParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeData {
    Document,
    Element {
        name: String,
        attrs: Vec<(String, String)>,
    },
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub data: NodeData,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
}

/// A searchable piece of response text: a text node, a control's `value`
/// attribute, or a JSON leaf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub locator: Locator,
    pub text: String,
}

/// Owned HTML tree. Comments, doctypes and processing instructions are
/// dropped; everything else keeps the order the tree builder produced.
#[derive(Debug, Clone)]
pub struct Document {
    nodes: Vec<Node>,
}

const HIDDEN_TEXT_PARENTS: &[&str] = &["script", "style", "template", "noscript"];

impl Document {
    /// Tolerant parse: malformed markup is recovered with the standard HTML
    /// tree-construction rules.
    pub fn parse(html: &str) -> Document {
        let parsed = scraper::Html::parse_document(html);
        let mut doc = Document {
            nodes: vec![Node {
                data: NodeData::Document,
                parent: None,
                children: Vec::new(),
            }],
        };
        for child in parsed.tree.root().children() {
            doc.import(child, 0);
        }
        doc
    }

    fn import(&mut self, src: ego_tree::NodeRef<'_, scraper::Node>, parent: NodeId) {
        let data = match src.value() {
            scraper::Node::Element(el) => NodeData::Element {
                name: el.name().to_ascii_lowercase(),
                attrs: el
                    .attrs()
                    .map(|(k, v)| (k.to_ascii_lowercase(), v.to_string()))
                    .collect(),
            },
            scraper::Node::Text(t) => NodeData::Text(t.to_string()),
            _ => return,
        };
        let id = self.nodes.len();
        self.nodes.push(Node {
            data,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        for child in src.children() {
            self.import(child, id);
        }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn element_name(&self, id: NodeId) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { name, .. } => Some(name),
            _ => None,
        }
    }

    pub fn attr(&self, id: NodeId, attr: &str) -> Option<&str> {
        match &self.nodes[id].data {
            NodeData::Element { attrs, .. } => attrs
                .iter()
                .find(|(k, _)| k == attr)
                .map(|(_, v)| v.as_str()),
            _ => None,
        }
    }

    pub fn has_attr(&self, id: NodeId, attr: &str) -> bool {
        self.attr(id, attr).is_some()
    }

    /// Nodes of the subtree rooted at `id` in document order, `id` included.
    pub fn descendants(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    pub fn elements_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = NodeId> + 'a {
        self.descendants(0)
            .into_iter()
            .filter(move |&n| self.element_name(n) == Some(name))
    }

    pub fn element_by_id(&self, id_attr: &str) -> Option<NodeId> {
        self.descendants(0)
            .into_iter()
            .find(|&n| self.attr(n, "id") == Some(id_attr))
    }

    pub fn is_ancestor(&self, ancestor: NodeId, mut node: NodeId) -> bool {
        while let Some(p) = self.nodes[node].parent {
            if p == ancestor {
                return true;
            }
            node = p;
        }
        false
    }

    /// Concatenated text of all text nodes below `id`.
    pub fn text_content(&self, id: NodeId) -> String {
        self.descendants(id)
            .into_iter()
            .filter_map(|n| match &self.nodes[n].data {
                NodeData::Text(t) => Some(t.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn path_of(&self, mut id: NodeId) -> Vec<usize> {
        let mut path = Vec::new();
        while let Some(parent) = self.nodes[id].parent {
            let idx = self.nodes[parent]
                .children
                .iter()
                .position(|&c| c == id)
                .expect("child listed under its parent");
            path.push(idx);
            id = parent;
        }
        path.reverse();
        path
    }

    /// `#id` when the element's id is unique, otherwise its structural path.
    pub fn locator_of(&self, id: NodeId) -> Locator {
        if let Some(id_attr) = self.attr(id, "id") {
            if !id_attr.is_empty() && self.element_by_id(id_attr) == Some(id) {
                let dupes = self
                    .descendants(0)
                    .into_iter()
                    .filter(|&n| self.attr(n, "id") == Some(id_attr))
                    .count();
                if dupes == 1 {
                    return Locator::Id(id_attr.to_string());
                }
            }
        }
        Locator::Path(self.path_of(id))
    }

    /// Resolves `#id` and `path:` locators. Form-control locators need the
    /// extracted forms and are handled by the page.
    pub fn resolve(&self, locator: &Locator) -> Option<NodeId> {
        match locator {
            Locator::Id(id) => self.element_by_id(id),
            Locator::Path(path) => {
                let mut node = 0;
                for &idx in path {
                    node = *self.nodes[node].children.get(idx)?;
                }
                Some(node)
            }
            _ => None,
        }
    }

    fn inside_hidden_text(&self, mut id: NodeId) -> bool {
        while let Some(p) = self.nodes[id].parent {
            if let Some(name) = self.element_name(p) {
                if HIDDEN_TEXT_PARENTS.contains(&name) {
                    return true;
                }
            }
            id = p;
        }
        false
    }

    /// Every non-blank text node and every `value` attribute of `input` and
    /// `button` elements, once each, in document order.
    pub fn leaf_texts(&self) -> Vec<Leaf> {
        let mut leaves = Vec::new();
        for n in self.descendants(0) {
            match &self.nodes[n].data {
                NodeData::Text(t) => {
                    if !t.trim().is_empty() && !self.inside_hidden_text(n) {
                        leaves.push(Leaf {
                            locator: Locator::Path(self.path_of(n)),
                            text: t.clone(),
                        });
                    }
                }
                NodeData::Element { name, .. } if name == "input" || name == "button" => {
                    if let Some(v) = self.attr(n, "value") {
                        if !v.trim().is_empty() {
                            leaves.push(Leaf {
                                locator: Locator::Path(self.path_of(n)),
                                text: v.to_string(),
                            });
                        }
                    }
                }
                _ => {}
            }
        }
        leaves
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(doc: &Document) -> Vec<String> {
        doc.leaf_texts().into_iter().map(|l| l.text).collect()
    }

    #[test]
    fn leaf_texts_in_document_order() {
        let doc = Document::parse("<p>Done <b>ok</b></p>");
        assert_eq!(texts(&doc), vec!["Done ", "ok"]);
        let leaves = doc.leaf_texts();
        // each locator resolves back to a text node with the same content
        for leaf in leaves {
            let id = doc.resolve(&leaf.locator).unwrap();
            assert!(matches!(&doc.node(id).data, NodeData::Text(t) if *t == leaf.text));
        }
    }

    #[test]
    fn input_value_is_a_leaf() {
        let doc = Document::parse("<input value='$12,345.00'>");
        assert_eq!(texts(&doc), vec!["$12,345.00"]);
    }

    #[test]
    fn script_text_is_not_a_leaf() {
        let doc = Document::parse("<p>a</p><script>var x = 'done';</script>");
        assert_eq!(texts(&doc), vec!["a"]);
    }

    #[test]
    fn malformed_markup_is_recovered() {
        let doc = Document::parse("<b><i>x</b>");
        assert_eq!(texts(&doc), vec!["x"]);
    }

    #[test]
    fn locators_are_stable_across_reparse() {
        let html = "<div><form id=f><input name=a id=a><input name=b></form><p>t</p></div>";
        let a = Document::parse(html);
        let b = Document::parse(html);
        for n in a.descendants(0) {
            assert_eq!(a.locator_of(n), b.locator_of(n));
            assert_eq!(a.resolve(&a.locator_of(n)), Some(n));
        }
    }

    #[test]
    fn duplicate_ids_fall_back_to_paths() {
        let doc = Document::parse("<p id=x>1</p><p id=x>2</p>");
        let first = doc.elements_named("p").next().unwrap();
        assert!(matches!(doc.locator_of(first), Locator::Path(_)));
    }

    #[test]
    fn locator_syntax_round_trips() {
        for s in ["#go", "form[2]/name=TO", "path:0/1/3", "path:", "$.a[0]", "body"] {
            let l: Locator = s.parse().unwrap();
            assert_eq!(l.to_string(), s);
        }
        for bad in ["", "#", "form[x]/name=a", "form[0]/id=a", "path:1/a", "xpath://a"] {
            assert!(bad.parse::<Locator>().is_err(), "{bad}");
        }
    }
}
