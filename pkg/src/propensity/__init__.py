"""Binary propensity classifiers for tabular billing data.

Seven model families share one pipeline: a variational Bayesian network
with an undecided outcome, an entity-embedding network, a decision tree,
a random forest, gradient boosting, logistic regression and multinomial
naive Bayes.
"""

__version__ = "0.1.0"

from .baselines import LogisticRegression, MultinomialNB
from .bnn import BayesianMLPClassifier, decide, histogram_report, posterior_predictive
from .dnn import EmbeddingMLPClassifier
from .metrics import UNDECIDED, evaluate
from .trees import DecisionTreeClassifier, GradientBoostingClassifier, RandomForestClassifier

__all__ = [
    "BayesianMLPClassifier", "DecisionTreeClassifier", "EmbeddingMLPClassifier",
    "GradientBoostingClassifier", "LogisticRegression", "MultinomialNB",
    "RandomForestClassifier", "UNDECIDED", "decide", "evaluate", "histogram_report",
    "posterior_predictive",
]
