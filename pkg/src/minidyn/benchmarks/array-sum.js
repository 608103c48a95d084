// Fill an array and sum its elements.
function fill(n) {
    var a = [];
    for (var i = 0; i < n; i++) {
        a[i] = i * 2;
    }
    return a;
}

function total(a) {
    var s = 0;
    for (var i = 0; i < a.length; i++) {
        s = s + a[i];
    }
    return s;
}

function main() {
    var a = fill(200);
    return total(a) + total(a);
}
