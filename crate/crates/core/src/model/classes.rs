use serde::{Deserialize, Serialize};

use super::ModelError;

/// Canonical class order used when a manifest does not declare its own.
pub const CANONICAL_CLASSES: [&str; 3] = ["transformer", "circuit_breaker", "reactor"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentClass {
    pub id: usize,
    pub name: String,
}

impl ComponentClass {
    /// Plural title-case label used in report tables, e.g. `circuit_breaker`
    /// becomes `Circuit Breakers`.
    pub fn display_plural(&self) -> String {
        display_plural(&self.name)
    }
}

pub fn display_plural(name: &str) -> String {
    let words: Vec<String> = name
        .split(|c: char| c == '_' || c == ' ' || c == '-')
        .filter(|w| !w.is_empty())
        .map(|w| {
            let mut chars = w.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        })
        .collect();
    format!("{}s", words.join(" "))
}

/// Ordered class list; position is the class id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ComponentClass>", into = "Vec<ComponentClass>")]
pub struct ClassList(Vec<ComponentClass>);

impl ClassList {
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, ModelError> {
        let classes: Vec<ComponentClass> = names
            .iter()
            .enumerate()
            .map(|(id, n)| ComponentClass { id, name: n.as_ref().trim().to_string() })
            .collect();
        Self::try_from(classes)
    }

    pub fn canonical() -> Self {
        Self::from_names(&CANONICAL_CLASSES).expect("canonical classes are valid")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&ComponentClass> {
        self.0.get(id)
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|c| c.name == name)
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.0.get(id).map(|c| c.name.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ComponentClass> {
        self.0.iter()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(|c| c.name.clone()).collect()
    }
}

impl Default for ClassList {
    fn default() -> Self {
        Self::canonical()
    }
}

impl TryFrom<Vec<ComponentClass>> for ClassList {
    type Error = ModelError;

    fn try_from(classes: Vec<ComponentClass>) -> Result<Self, Self::Error> {
        if classes.is_empty() {
            return Err(ModelError::InvalidClasses("class list is empty".into()));
        }
        for (pos, c) in classes.iter().enumerate() {
            if c.id != pos {
                return Err(ModelError::InvalidClasses(format!(
                    "class `{}` has id {} at position {pos}; ids must be contiguous from 0",
                    c.name, c.id
                )));
            }
            if c.name.is_empty() {
                return Err(ModelError::InvalidClasses(format!("class {pos} has an empty name")));
            }
            if classes[..pos].iter().any(|o| o.name == c.name) {
                return Err(ModelError::InvalidClasses(format!("duplicate class name `{}`", c.name)));
            }
        }
        Ok(Self(classes))
    }
}

impl From<ClassList> for Vec<ComponentClass> {
    fn from(list: ClassList) -> Self {
        list.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_order() {
        let c = ClassList::canonical();
        assert_eq!(c.id_of("transformer"), Some(0));
        assert_eq!(c.id_of("circuit_breaker"), Some(1));
        assert_eq!(c.id_of("reactor"), Some(2));
    }

    #[test]
    fn plural_names() {
        assert_eq!(display_plural("circuit_breaker"), "Circuit Breakers");
        assert_eq!(display_plural("transformer"), "Transformers");
    }

    #[test]
    fn duplicate_names_rejected() {
        assert!(ClassList::from_names(&["a", "b", "a"]).is_err());
    }

    #[test]
    fn non_contiguous_ids_rejected() {
        let raw = vec![ComponentClass { id: 0, name: "a".into() }, ComponentClass { id: 2, name: "b".into() }];
        assert!(ClassList::try_from(raw).is_err());
    }
}
