package com.shop;

public class Item {
    private final String sku;
    private final Money price;

    public Item(String sku, Money price) {
        this.sku = sku;
        this.price = price;
    }

    public String sku() {
        return sku;
    }

    public Money price() {
        return price;
    }
}
