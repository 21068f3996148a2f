//! Column serialization: `(name, description) -> "name : description"`.

use crate::schema::ColumnSchema;
use serde::{Deserialize, Serialize};

/// One serialized column line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerializedColumn {
    pub text: String,
}

impl SerializedColumn {
    /// Splits back into (name, description) on the first " : ".
    pub fn parse(&self) -> (&str, &str) {
        match self.text.split_once(" : ") {
            Some((name, desc)) => (name, desc),
            None => (self.text.as_str(), ""),
        }
    }
}

/// Maps each column to `"<name> : <description>"`, preserving order.
pub fn serialize_columns(schema: &[ColumnSchema]) -> Vec<SerializedColumn> {
    schema
        .iter()
        .map(|c| SerializedColumn {
            text: format!("{} : {}", c.name, c.description),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_name_and_description() {
        let schema = vec![ColumnSchema::categorical("order city", "city of the order")];
        let out = serialize_columns(&schema);
        assert_eq!(out[0].text, "order city : city of the order");
    }

    #[test]
    fn empty_description_keeps_separator() {
        let schema = vec![ColumnSchema::numeric("price", "")];
        let out = serialize_columns(&schema);
        assert_eq!(out[0].text, "price : ");
        assert_eq!(out[0].parse(), ("price", ""));
    }

    #[test]
    fn preserves_length_and_order() {
        let schema = vec![
            ColumnSchema::numeric("a", "1"),
            ColumnSchema::numeric("b", "2"),
            ColumnSchema::numeric("c", "3"),
        ];
        let out = serialize_columns(&schema);
        assert_eq!(out.len(), 3);
        let names: Vec<&str> = out.iter().map(|s| s.parse().0).collect();
        assert_eq!(names, vec!["a", "b", "c"]);
    }
}
